//! Relabeling and alternative data selectors for synthetic examples.

mod cartography;
mod relabel;
mod select;
mod uncertainty;

use serde::Serialize;
use std::path::Path;
use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::corpus::{write_rows, CorpusError, LabeledExample};

pub use cartography::{cartography, CartographyCategory, CartographyLabel, CartographyThresholds};
pub use relabel::{relabel, Relabeled};
pub use select::{select_fraction, selection_size, Scored, SelectionStrategy};
pub use uncertainty::{
    assign_folds, breaking_ties, cross_val_scores, kl_divergence_log2, least_confidence, prediction_entropy,
    UncertaintyMethod, UncertaintyScore, CONTRASTIVE_NEIGHBOURS,
};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("{examples} examples cannot fill {folds} folds")]
    NotEnoughExamples { examples: usize, folds: usize },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("training trace {index} has {epochs} epochs; cartography needs at least 2")]
    TooFewEpochs { index: usize, epochs: usize },
    #[error("selection fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Io(#[from] CorpusError),
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    text: &'a str,
    label: &'a str,
    method: UncertaintyMethod,
    fold: usize,
    score: f64,
}

#[derive(Serialize)]
struct CartographyRow<'a> {
    text: &'a str,
    label: &'a str,
    category: CartographyCategory,
    confidence_mean: f64,
    confidence_std: f64,
    correctness: f64,
}

/// One JSONL row per score, joined with the example it refers to.
pub fn write_uncertainty(
    path: impl AsRef<Path>,
    examples: &[LabeledExample],
    scores: &[UncertaintyScore],
) -> Result<(), SelectorError> {
    let rows: Vec<ScoreRow> = scores
        .iter()
        .map(|s| ScoreRow {
            text: &examples[s.index].text,
            label: &examples[s.index].label,
            method: s.method,
            fold: s.fold,
            score: s.score,
        })
        .collect();
    Ok(write_rows(path, &rows)?)
}

pub fn write_cartography(
    path: impl AsRef<Path>,
    examples: &[LabeledExample],
    labels: &[CartographyLabel],
) -> Result<(), SelectorError> {
    let rows: Vec<CartographyRow> = labels
        .iter()
        .map(|l| CartographyRow {
            text: &examples[l.index].text,
            label: &examples[l.index].label,
            category: l.category,
            confidence_mean: l.confidence_mean,
            confidence_std: l.confidence_std,
            correctness: l.correctness,
        })
        .collect();
    Ok(write_rows(path, &rows)?)
}
