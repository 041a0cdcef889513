//! Offline stand-in for a large generator.
//!
//! Each completion is a random walk over the word-bigram graph of one
//! intent's reference utterances. Every distinct continuation of a word is
//! equally likely, except that words already in the walk are down-weighted
//! by the request's repetition penalty. With probability `noise_rate` the walk
//! uses a different intent than the prompted one, picked with weight
//! proportional to vocabulary overlap, so contamination tends to come from
//! look-alike intents. Every draw is logged with the intent it was really
//! built from.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use super::backend::{excerpt, BackendError, CompletionRequest, GenerationBackend};
use super::prompt::{display_name, parse_intent_name};
use super::GeneratorError;
use crate::corpus::LabeledExample;
use crate::seed;

const MAX_WORDS: usize = 24;
/// Added to every vocabulary-overlap weight so unrelated intents can still
/// be drawn.
const CONTAMINATION_FLOOR: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockDraw {
    pub request_seed: u64,
    pub index: usize,
    pub prompt_intent: String,
    pub source_intent: String,
    /// The generated sentence, before the trailing continuation.
    pub text: String,
}

impl MockDraw {
    pub fn contaminated(&self) -> bool {
        self.prompt_intent != self.source_intent
    }
}

#[derive(Debug)]
struct Chain {
    label: String,
    starts: Vec<String>,
    /// Distinct continuations per word in first-seen order; `None` ends.
    next: HashMap<String, Vec<Option<String>>>,
}

impl Chain {
    fn build(label: &str, texts: &[&str]) -> Self {
        let mut starts = Vec::new();
        let mut next: HashMap<String, Vec<Option<String>>> = HashMap::new();
        for text in texts {
            let words: Vec<&str> = text.split_whitespace().collect();
            let Some(first) = words.first() else { continue };
            if !starts.iter().any(|s| s == first) {
                starts.push(first.to_string());
            }
            let mut add = |from: &str, to: Option<String>| {
                let succ = next.entry(from.to_string()).or_default();
                if !succ.contains(&to) {
                    succ.push(to);
                }
            };
            for pair in words.windows(2) {
                add(pair[0], Some(pair[1].to_string()));
            }
            add(words[words.len() - 1], None);
        }
        Self {
            label: label.to_string(),
            starts,
            next,
        }
    }

    fn walk(&self, rng: &mut impl Rng, max_words: usize, repetition_penalty: f64) -> String {
        let mut current = self.starts.choose(rng).expect("chain has a start").clone();
        let mut words = vec![current.clone()];
        while words.len() < max_words {
            let Some(succ) = self.next.get(&current) else { break };
            let weights: Vec<f64> = succ
                .iter()
                .map(|w| match w {
                    Some(w) if words.contains(w) => 1.0 / repetition_penalty,
                    _ => 1.0,
                })
                .collect();
            let pick = WeightedIndex::new(&weights).expect("positive weights").sample(rng);
            match &succ[pick] {
                Some(w) => {
                    current = w.clone();
                    words.push(current.clone());
                }
                None => break,
            }
        }
        words.join(" ")
    }

    fn vocabulary(&self) -> BTreeSet<&str> {
        self.starts
            .iter()
            .map(String::as_str)
            .chain(self.next.keys().map(String::as_str))
            .collect()
    }
}

pub struct MockBackend {
    noise_rate: f64,
    seed: u64,
    chains: Vec<Chain>,
    by_display_name: HashMap<String, usize>,
    /// Per intent: candidate contamination sources with sampling weights.
    contamination: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
    log: Mutex<Vec<MockDraw>>,
}

impl MockBackend {
    /// `corpus` supplies the utterances each intent's walks are built from.
    pub fn new(corpus: &[LabeledExample], noise_rate: f64, seed: u64) -> Result<Self, GeneratorError> {
        if corpus.is_empty() {
            return Err(GeneratorError::EmptyMockCorpus);
        }
        if !(0.0..=1.0).contains(&noise_rate) {
            return Err(GeneratorError::InvalidNoiseRate(noise_rate));
        }
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in corpus {
            groups.entry(&e.label).or_default().push(&e.text);
        }
        let chains: Vec<Chain> = groups.iter().map(|(label, texts)| Chain::build(label, texts)).collect();
        let by_display_name = chains
            .iter()
            .enumerate()
            .map(|(i, c)| (display_name(&c.label), i))
            .collect();
        let vocabularies: Vec<BTreeSet<&str>> = chains.iter().map(Chain::vocabulary).collect();
        let contamination = (0..chains.len())
            .map(|i| {
                let others: Vec<usize> = (0..chains.len()).filter(|&j| j != i).collect();
                if others.is_empty() {
                    return None;
                }
                let weights: Vec<f64> = others
                    .iter()
                    .map(|&j| jaccard(&vocabularies[i], &vocabularies[j]) + CONTAMINATION_FLOOR)
                    .collect();
                Some((others, WeightedIndex::new(weights).expect("positive weights")))
            })
            .collect();
        Ok(Self {
            noise_rate,
            seed,
            chains,
            by_display_name,
            contamination,
            log: Mutex::new(Vec::new()),
        })
    }

    /// Every draw so far, ordered by request seed then position.
    pub fn draws(&self) -> Vec<MockDraw> {
        let mut out = self.log.lock().expect("mock log poisoned").clone();
        out.sort_by_key(|d| (d.request_seed, d.index));
        out
    }

    /// Intent whose material produced `text` when `prompt_intent` was
    /// prompted, if the mock ever generated it.
    pub fn source_lookup(&self) -> HashMap<(String, String), String> {
        let mut out = HashMap::new();
        for d in self.draws() {
            out.entry((d.prompt_intent, d.text)).or_insert(d.source_intent);
        }
        out
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("mock log poisoned").clear();
    }
}

fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

impl GenerationBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let name = parse_intent_name(&request.prompt)
            .ok_or_else(|| BackendError::Malformed(format!("prompt has no intent line: {}", excerpt(&request.prompt))))?;
        let &prompted = self
            .by_display_name
            .get(name)
            .ok_or_else(|| BackendError::Malformed(format!("mock knows no intent named {name:?}")))?;
        let mut rng = seed::rng(self.seed, &format!("mock/{}", request.seed));
        let max_words = request.max_new_tokens.min(MAX_WORDS);
        let mut draws = Vec::with_capacity(request.n);
        let mut out = Vec::with_capacity(request.n);
        for index in 0..request.n {
            let noisy = rng.gen_bool(self.noise_rate);
            let source = match (&self.contamination[prompted], noisy) {
                (Some((others, weights)), true) => others[weights.sample(&mut rng)],
                _ => prompted,
            };
            let penalty = if request.repetition_penalty.is_finite() { request.repetition_penalty.max(1.0) } else { 1.0 };
            let text = self.chains[source].walk(&mut rng, max_words, penalty);
            // Mimic a language model running on into the next example line.
            out.push(format!(" {text}\nExample: {}", self.chains[prompted].walk(&mut rng, 4, penalty)));
            draws.push(MockDraw {
                request_seed: request.seed,
                index,
                prompt_intent: self.chains[prompted].label.clone(),
                source_intent: self.chains[source].label.clone(),
                text,
            });
        }
        self.log.lock().expect("mock log poisoned").extend(draws);
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("mock noise_rate={} seed={}", self.noise_rate, self.seed)
    }
}
