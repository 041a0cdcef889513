//! Synthetic utterance generation: prompt construction, backend requests,
//! completion cleanup and multiplier bookkeeping.

mod backend;
mod mock;
mod prompt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::time::Duration;
use thiserror::Error;

pub use backend::{BackendError, CompletionRequest, CompletionResponse, GenerationBackend, HttpBackend};
pub use mock::{MockBackend, MockDraw};
pub use prompt::{
    build_prompt, build_prompts, display_name, parse_intent_name, DecodingConfig, MultiplierPlan, PromptSpec,
    COMPLETION_CUE, TEMPLATE_VERSION,
};

use crate::corpus::LabeledExample;
use crate::seed;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("intent \"{0}\" has no seed examples to prompt with")]
    EmptySeeds(String),
    #[error("prompt for \"{intent}\" received a seed labeled \"{found}\"")]
    MixedIntents { intent: String, found: String },
    #[error("seed utterance spans several lines: {0:?}")]
    MultilineSeed(String),
    #[error("data multiplier must be positive")]
    ZeroMultiplier,
    #[error("invalid decoding config: {0}")]
    InvalidDecoding(String),
    #[error("no prompt supplied for intent \"{0}\"")]
    MissingPrompt(String),
    #[error("mock backend needs a non-empty corpus")]
    EmptyMockCorpus,
    #[error("noise rate must be within [0, 1], got {0}")]
    InvalidNoiseRate(f64),
    #[error("backend failed for intent \"{intent}\" after {attempts} attempts: {source}; progress: {}", format_progress(.progress))]
    Backend {
        intent: String,
        attempts: usize,
        #[source]
        source: BackendError,
        /// Accepted vs target count per intent at the time of failure.
        progress: BTreeMap<String, (usize, usize)>,
    },
}

fn format_progress(p: &BTreeMap<String, (usize, usize)>) -> String {
    p.iter()
        .map(|(k, (got, want))| format!("{k}={got}/{want}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Request loop limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub decoding: DecodingConfig,
    /// Request rounds per intent before giving up with a partial result.
    pub max_rounds: usize,
    /// Attempts per request on retryable backend errors.
    pub max_attempts: usize,
    #[serde(with = "millis")]
    pub retry_backoff: Duration,
    /// Intents generated concurrently.
    pub max_in_flight: usize,
    /// Upper bound on `n` per request.
    pub max_batch: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            decoding: DecodingConfig::default(),
            max_rounds: 20,
            max_attempts: 3,
            retry_backoff: Duration::from_millis(250),
            max_in_flight: 4,
            max_batch: 64,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    /// Synthetic examples sorted by intent, then arrival.
    pub examples: Vec<LabeledExample>,
    pub requests: usize,
    pub completions: usize,
    pub empty_dropped: usize,
    /// Completions identical to a seed or an earlier synthetic of the same intent.
    pub duplicates_dropped: usize,
    /// Intents that ran out of rounds: (produced, target).
    pub shortfalls: BTreeMap<String, (usize, usize)>,
}

/// Cuts at the earliest stop sequence and trims. `None` if nothing is left.
pub fn clean_completion(raw: &str, stop: &[String]) -> Option<String> {
    let cut = stop.iter().filter_map(|s| raw.find(s.as_str())).min().unwrap_or(raw.len());
    let text = raw[..cut].trim();
    (!text.is_empty()).then(|| text.to_string())
}

struct IntentResult {
    intent: String,
    target: usize,
    examples: Vec<LabeledExample>,
    requests: usize,
    completions: usize,
    empty_dropped: usize,
    duplicates_dropped: usize,
    error: Option<(usize, BackendError)>,
}

fn generate_intent(
    backend: &dyn GenerationBackend,
    prompt: &PromptSpec,
    target: usize,
    settings: &GenerationSettings,
    run_seed: u64,
) -> IntentResult {
    let rendered = prompt.render();
    let mut seen: HashSet<String> = prompt.seed_examples.iter().cloned().collect();
    let mut res = IntentResult {
        intent: prompt.intent.clone(),
        target,
        examples: Vec::with_capacity(target),
        requests: 0,
        completions: 0,
        empty_dropped: 0,
        duplicates_dropped: 0,
        error: None,
    };
    for round in 0..settings.max_rounds {
        let need = target - res.examples.len();
        if need == 0 {
            break;
        }
        let request = CompletionRequest {
            prompt: rendered.clone(),
            n: need.min(settings.max_batch.max(1)),
            typical_p: settings.decoding.typical_p,
            repetition_penalty: settings.decoding.repetition_penalty,
            max_new_tokens: settings.decoding.max_new_tokens,
            stop: settings.decoding.stop.clone(),
            seed: seed::derive(run_seed, &format!("generate/{}/{round}", prompt.intent)),
        };
        let mut attempt = 0;
        let completions = loop {
            attempt += 1;
            res.requests += 1;
            match backend.complete(&request) {
                Ok(c) => break c,
                Err(e) if e.is_retryable() && attempt < settings.max_attempts.max(1) => {
                    log::debug!("retrying {} after: {e}", prompt.intent);
                    std::thread::sleep(settings.retry_backoff * attempt as u32);
                }
                Err(e) => {
                    res.error = Some((attempt, e));
                    return res;
                }
            }
        };
        for raw in completions {
            res.completions += 1;
            let Some(text) = clean_completion(&raw, &settings.decoding.stop) else {
                res.empty_dropped += 1;
                continue;
            };
            if !seen.insert(text.clone()) {
                res.duplicates_dropped += 1;
                continue;
            }
            res.examples.push(LabeledExample::synthetic(text, prompt.intent.clone()));
            if res.examples.len() == target {
                break;
            }
        }
    }
    res
}

/// Requests completions for every intent in `plan` until its target is met
/// or `max_rounds` is exhausted. Intents run concurrently, at most
/// `max_in_flight` at a time; the result does not depend on scheduling.
pub fn generate(
    backend: &dyn GenerationBackend,
    plan: &MultiplierPlan,
    prompts: &[PromptSpec],
    settings: &GenerationSettings,
    seed: u64,
) -> Result<GenerationOutcome, GeneratorError> {
    settings.decoding.validate()?;
    let by_intent: BTreeMap<&str, &PromptSpec> = prompts.iter().map(|p| (p.intent.as_str(), p)).collect();
    let jobs = plan
        .per_intent_targets
        .iter()
        .map(|(intent, &target)| {
            by_intent
                .get(intent.as_str())
                .map(|p| (*p, target))
                .ok_or_else(|| GeneratorError::MissingPrompt(intent.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.max_in_flight.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<IntentResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(prompt, target)| generate_intent(backend, prompt, target, settings, seed))
            .collect()
    });

    if let Some(failed) = results.iter().find(|r| r.error.is_some()) {
        let (attempts, source) = failed.error.clone().expect("checked");
        return Err(GeneratorError::Backend {
            intent: failed.intent.clone(),
            attempts,
            source,
            progress: results
                .iter()
                .map(|r| (r.intent.clone(), (r.examples.len(), r.target)))
                .collect(),
        });
    }
    let mut out = GenerationOutcome::default();
    for r in results {
        if r.examples.len() < r.target {
            log::warn!(
                "intent {} produced {}/{} synthetic examples before running out of rounds",
                r.intent,
                r.examples.len(),
                r.target
            );
            out.shortfalls.insert(r.intent.clone(), (r.examples.len(), r.target));
        }
        out.requests += r.requests;
        out.completions += r.completions;
        out.empty_dropped += r.empty_dropped;
        out.duplicates_dropped += r.duplicates_dropped;
        out.examples.extend(r.examples);
    }
    Ok(out)
}
