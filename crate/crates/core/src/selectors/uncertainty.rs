use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::SelectorError;
use crate::classifier::{train, FeatureVector, TrainConfig};
use crate::corpus::{LabelVocabulary, LabeledExample};
use crate::seed;

/// Neighbours consulted by the contrastive score.
pub const CONTRASTIVE_NEIGHBOURS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMethod {
    LeastConfidence,
    PredictionEntropy,
    BreakingTies,
    ContrastiveAl,
}

impl UncertaintyMethod {
    pub const ALL: [UncertaintyMethod; 4] = [
        UncertaintyMethod::LeastConfidence,
        UncertaintyMethod::PredictionEntropy,
        UncertaintyMethod::BreakingTies,
        UncertaintyMethod::ContrastiveAl,
    ];
}

/// Higher means more uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    /// Position of the example in the scored list.
    pub index: usize,
    pub fold: usize,
    pub method: UncertaintyMethod,
    pub score: f64,
}

/// `1 - max p`.
pub fn least_confidence(probs: &[f64]) -> f64 {
    1.0 - probs.iter().copied().fold(0.0, f64::max)
}

/// Shannon entropy in bits; zero-probability terms contribute nothing.
pub fn prediction_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// `1 - (p_first - p_second)`.
pub fn breaking_ties(probs: &[f64]) -> f64 {
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    1.0 - (first - second)
}

/// KL(p || q) in bits from base-2 log-probabilities.
pub fn kl_divergence_log2(log2_p: &[f64], log2_q: &[f64]) -> f64 {
    log2_p
        .iter()
        .zip(log2_q)
        .map(|(&lp, &lq)| {
            let p = lp.exp2();
            if p == 0.0 {
                0.0
            } else {
                p * (lp - lq)
            }
        })
        .sum()
}

/// Fold id per example. When every intent has at least `folds` examples,
/// each intent is shuffled and dealt round-robin so folds are stratified;
/// otherwise the whole list is shuffled and dealt.
pub fn assign_folds(examples: &[LabeledExample], folds: usize, seed: u64) -> Result<Vec<usize>, SelectorError> {
    if folds < 2 {
        return Err(SelectorError::TooFewFolds(folds));
    }
    if examples.len() < folds {
        return Err(SelectorError::NotEnoughExamples {
            examples: examples.len(),
            folds,
        });
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        by_label.entry(&e.label).or_default().push(i);
    }
    let mut rng = seed::rng(seed, "folds");
    let mut out = vec![0; examples.len()];
    if by_label.values().all(|v| v.len() >= folds) {
        let mut offset = 0;
        for members in by_label.values_mut() {
            members.shuffle(&mut rng);
            for (j, &i) in members.iter().enumerate() {
                out[i] = (offset + j) % folds;
            }
            offset += members.len();
        }
    } else {
        log::warn!("some intent has fewer than {folds} examples; using unstratified folds");
        let mut all: Vec<usize> = (0..examples.len()).collect();
        all.shuffle(&mut rng);
        for (j, &i) in all.iter().enumerate() {
            out[i] = j % folds;
        }
    }
    Ok(out)
}

/// Scores each example with a model trained on the other folds.
pub fn cross_val_scores(
    examples: &[LabeledExample],
    vocabulary: &LabelVocabulary,
    method: UncertaintyMethod,
    folds: usize,
    config: &TrainConfig,
) -> Result<Vec<UncertaintyScore>, SelectorError> {
    let assignment = assign_folds(examples, folds, config.seed)?;
    let features: Vec<FeatureVector> = examples.iter().map(|e| config.features.featurize(&e.text)).collect();
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<Vec<UncertaintyScore>, SelectorError> {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..examples.len()).partition(|&i| assignment[i] == fold);
            let train_set: Vec<LabeledExample> = kept.iter().map(|&i| examples[i].clone()).collect();
            let fold_config = TrainConfig {
                seed: seed::derive(config.seed, &format!("fold/{fold}")),
                record_dynamics: false,
                ..config.clone()
            };
            let model = train(&train_set, vocabulary, &fold_config, false)?.model;
            let kept_log2: Vec<Vec<f64>> = if method == UncertaintyMethod::ContrastiveAl {
                kept.iter().map(|&i| model.predict_log2_proba(&features[i])).collect()
            } else {
                Vec::new()
            };
            Ok(held
                .iter()
                .map(|&i| {
                    let log2_p = model.predict_log2_proba(&features[i]);
                    let probs: Vec<f64> = log2_p.iter().map(|v| v.exp2()).collect();
                    let score = match method {
                        UncertaintyMethod::LeastConfidence => least_confidence(&probs),
                        UncertaintyMethod::PredictionEntropy => prediction_entropy(&probs),
                        UncertaintyMethod::BreakingTies => breaking_ties(&probs),
                        UncertaintyMethod::ContrastiveAl => {
                            let mut sims: Vec<(f64, usize)> = kept
                                .iter()
                                .enumerate()
                                .map(|(k, &j)| (features[i].cosine(&features[j]), k))
                                .collect();
                            sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                            let nn = &sims[..CONTRASTIVE_NEIGHBOURS.min(sims.len())];
                            nn.iter().map(|&(_, k)| kl_divergence_log2(&kept_log2[k], &log2_p)).sum::<f64>()
                                / nn.len() as f64
                        }
                    };
                    UncertaintyScore {
                        index: i,
                        fold,
                        method,
                        score,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut scores: Vec<UncertaintyScore> = per_fold.into_iter().flatten().collect();
    scores.sort_by_key(|s| s.index);
    Ok(scores)
}
