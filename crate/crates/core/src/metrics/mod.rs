//! Diversity and fluency metrics for utterance corpora.

mod diversity;
mod lm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diversity::{distinct_n, self_bleu, BLEU_EPSILON};
pub use lm::{perplexity, train_ngram_lm, NgramLanguageModel, END, UNK};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("no text has {0} or more tokens")]
    NoNgrams(usize),
    #[error("self-BLEU needs at least two texts, got {0}")]
    CorpusTooSmall(usize),
    #[error("smoothing constant must be positive, got {0}")]
    InvalidDelta(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub lm_order: usize,
    pub lm_delta: f64,
    /// Training tokens seen fewer times than this map to `<unk>`.
    pub lm_min_count: usize,
    pub bleu_max_n: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            lm_order: 3,
            lm_delta: 0.1,
            lm_min_count: 2,
            bleu_max_n: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub distinct1: f64,
    pub distinct2: f64,
    pub self_bleu: f64,
    pub perplexity: f64,
    pub corpus_size: usize,
}

/// All four metrics for `corpus`, with perplexity under `lm`.
pub fn diversity_report<S: AsRef<str> + Sync>(
    corpus: &[S],
    lm: &NgramLanguageModel,
    config: &MetricsConfig,
) -> Result<DiversityReport, MetricsError> {
    Ok(DiversityReport {
        distinct1: distinct_n(corpus, 1)?,
        distinct2: distinct_n(corpus, 2)?,
        self_bleu: self_bleu(corpus, config.bleu_max_n)?,
        perplexity: perplexity(lm, corpus)?,
        corpus_size: corpus.len(),
    })
}

/// Trains the reference language model described by `config`.
pub fn reference_lm<S: AsRef<str>>(reference: &[S], config: &MetricsConfig) -> Result<NgramLanguageModel, MetricsError> {
    NgramLanguageModel::train(reference, config.lm_order, config.lm_delta, config.lm_min_count)
}
