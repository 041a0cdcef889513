use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::MetricsError;
use crate::text::tokenize;

pub const UNK: &str = "<unk>";
pub const END: &str = "</s>";
const UNK_ID: u32 = 0;
const END_ID: u32 = 1;
/// Sentence-start padding; appears in contexts only, never predicted.
const START_ID: u32 = u32::MAX;

/// Additively smoothed word n-gram model.
///
/// The predictable vocabulary is every training token seen at least
/// `min_count` times plus `<unk>` and `</s>`. Each text is scored as its
/// tokens followed by `</s>`, with `order - 1` start symbols as left
/// padding; `</s>` counts as a token for perplexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramLanguageModel {
    order: usize,
    delta: f64,
    vocab: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, HashMap<u32, u64>>,
    context_totals: HashMap<Vec<u32>, u64>,
}

impl NgramLanguageModel {
    fn empty(order: usize, delta: f64) -> Self {
        let vocab = [(UNK.to_string(), UNK_ID), (END.to_string(), END_ID)].into_iter().collect();
        Self {
            order,
            delta,
            vocab,
            counts: HashMap::new(),
            context_totals: HashMap::new(),
        }
    }

    fn add_word(&mut self, w: &str) {
        let next = self.vocab.len() as u32;
        self.vocab.entry(w.to_string()).or_insert(next);
    }

    /// A model with no counts over `tokens ∪ {<unk>, </s>}`: every
    /// conditional distribution is uniform.
    pub fn uniform<S: AsRef<str>>(order: usize, tokens: &[S]) -> Result<Self, MetricsError> {
        if order == 0 {
            return Err(MetricsError::InvalidOrder);
        }
        let mut lm = Self::empty(order, 1.0);
        for t in tokens {
            lm.add_word(t.as_ref());
        }
        Ok(lm)
    }

    pub fn train<S: AsRef<str>>(reference: &[S], order: usize, delta: f64, min_count: usize) -> Result<Self, MetricsError> {
        if reference.is_empty() {
            return Err(MetricsError::EmptyCorpus);
        }
        if order == 0 {
            return Err(MetricsError::InvalidOrder);
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(MetricsError::InvalidDelta(delta));
        }
        let docs: Vec<Vec<String>> = reference.iter().map(|t| tokenize(t.as_ref())).collect();
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for d in &docs {
            for t in d {
                *freq.entry(t).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<&str> = freq.iter().filter(|(_, &c)| c >= min_count).map(|(&t, _)| t).collect();
        kept.sort_unstable();
        let mut lm = Self::empty(order, delta);
        for t in kept {
            lm.add_word(t);
        }
        for d in &docs {
            let ids = lm.encode(d);
            for (ctx, w) in lm.events(&ids) {
                *lm.counts.entry(ctx.clone()).or_default().entry(w).or_insert(0) += 1;
                *lm.context_totals.entry(ctx).or_insert(0) += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Size of the predictable vocabulary (known tokens, `<unk>`, `</s>`).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.vocab.get(t).copied().unwrap_or(UNK_ID)).collect()
    }

    /// (context, predicted id) for every position of one text, `</s>` included.
    fn events(&self, ids: &[u32]) -> Vec<(Vec<u32>, u32)> {
        let pad = self.order - 1;
        let mut seq = vec![START_ID; pad];
        seq.extend_from_slice(ids);
        seq.push(END_ID);
        (pad..seq.len()).map(|i| (seq[i - pad..i].to_vec(), seq[i])).collect()
    }

    fn prob_ids(&self, context: &[u32], word: u32) -> f64 {
        let c = self.counts.get(context).and_then(|m| m.get(&word)).copied().unwrap_or(0);
        let total = self.context_totals.get(context).copied().unwrap_or(0);
        (c as f64 + self.delta) / (total as f64 + self.delta * self.vocab.len() as f64)
    }

    /// `p(word | context)`. Context holds the preceding tokens, most recent
    /// last; only the final `order - 1` are used and missing ones are start
    /// padding.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let pad = self.order - 1;
        let mut ctx: Vec<u32> = context
            .iter()
            .rev()
            .take(pad)
            .map(|t| self.vocab.get(*t).copied().unwrap_or(UNK_ID))
            .collect();
        ctx.resize(pad, START_ID);
        ctx.reverse();
        let w = self.vocab.get(word).copied().unwrap_or(UNK_ID);
        self.prob_ids(&ctx, w)
    }

    /// Every predictable token, `<unk>` and `</s>` included.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<(&str, u32)> = self.vocab.iter().map(|(k, &i)| (k.as_str(), i)).collect();
        v.sort_by_key(|&(_, i)| i);
        v.into_iter().map(|(k, _)| k).collect()
    }

    /// Sum of log2 probabilities and number of predicted tokens for a text.
    pub fn log2_score(&self, text: &str) -> (f64, usize) {
        let ids = self.encode(&tokenize(text));
        let events = self.events(&ids);
        let total = events.iter().map(|(ctx, w)| self.prob_ids(ctx, *w).log2()).sum();
        (total, events.len())
    }
}

pub fn train_ngram_lm<S: AsRef<str>>(reference: &[S], order: usize, delta: f64) -> Result<NgramLanguageModel, MetricsError> {
    NgramLanguageModel::train(reference, order, delta, 2)
}

/// `2^(-mean log2 p)` over every predicted token of the corpus, `</s>`
/// included.
pub fn perplexity<S: AsRef<str>>(lm: &NgramLanguageModel, corpus: &[S]) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut per_text: Vec<(f64, usize)> = corpus.iter().map(|t| lm.log2_score(t.as_ref())).collect();
    per_text.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (sum, n) = per_text.iter().fold((0.0, 0usize), |(s, n), &(ls, c)| (s + ls, n + c));
    Ok((-sum / n as f64).exp2())
}
