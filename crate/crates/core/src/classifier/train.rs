use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::features::{FeatureConfig, FeatureVector};
use super::model::{argmax, TaskModel};
use super::objective::{AdamW, Gradient, Parameters, SparseExample};
use super::ClassifierError;
use crate::corpus::{LabelVocabulary, LabeledExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub record_dynamics: bool,
    pub features: FeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 16,
            learning_rate: 0.1,
            weight_decay: 0.01,
            seed: 0,
            record_dynamics: false,
            features: FeatureConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.features.dimension < 2 || self.features.max_order == 0 {
            return bad("feature dimension must be >= 2 and max_order >= 1");
        }
        Ok(())
    }
}

/// Per-example training trace: probability of the gold label and whether
/// the argmax was correct, evaluated at the end of every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDynamicsRecord {
    pub confidences: Vec<f64>,
    pub correct: Vec<bool>,
}

impl TrainingDynamicsRecord {
    pub fn epochs(&self) -> usize {
        self.confidences.len()
    }

    pub fn confidence_mean(&self) -> f64 {
        self.confidences.iter().sum::<f64>() / self.confidences.len() as f64
    }

    /// Population standard deviation across epochs.
    pub fn confidence_std(&self) -> f64 {
        let mean = self.confidence_mean();
        let var = self.confidences.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / self.confidences.len() as f64;
        var.sqrt()
    }

    pub fn correctness(&self) -> f64 {
        self.correct.iter().filter(|&&c| c).count() as f64 / self.correct.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TaskModel,
    /// Mean training cross-entropy (nats) before the first epoch and after
    /// each epoch.
    pub loss_history: Vec<f64>,
    pub dynamics: Option<Vec<TrainingDynamicsRecord>>,
}

/// Fits a softmax-linear model with AdamW on mean cross-entropy.
///
/// In `null_mode` every input is replaced by the null feature vector, so
/// the model can only learn the label marginal, and every step uses the
/// whole set. Examples are reshuffled every epoch from
/// a stream seeded by `config.seed`.
pub fn train(
    examples: &[LabeledExample],
    vocabulary: &LabelVocabulary,
    config: &TrainConfig,
    null_mode: bool,
) -> Result<TrainOutcome, ClassifierError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let labels = examples
        .iter()
        .map(|e| {
            vocabulary
                .id(&e.label)
                .ok_or_else(|| ClassifierError::UnknownLabel(e.label.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vectors: Vec<FeatureVector> = examples
        .iter()
        .map(|e| {
            if null_mode {
                config.features.featurize_null()
            } else {
                config.features.featurize(&e.text)
            }
        })
        .collect();
    let feature_ids: Vec<u32> = vectors
        .iter()
        .flat_map(|v| v.indices().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let encoded: Vec<SparseExample> = vectors
        .iter()
        .zip(&labels)
        .map(|(v, &label)| SparseExample {
            cols: v
                .indices()
                .iter()
                .map(|id| feature_ids.binary_search(id).expect("id collected above"))
                .collect(),
            values: v.values().to_vec(),
            label,
        })
        .collect();

    let mut params = Parameters::zeros(vocabulary.len(), feature_ids.len());
    let mut optimizer = AdamW::new(&params, config.learning_rate, config.weight_decay);
    let mut grad = Gradient::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs + 1);
    loss_history.push(params.loss(&encoded));
    let mut dynamics = config.record_dynamics.then(|| {
        vec![
            TrainingDynamicsRecord {
                confidences: Vec::with_capacity(config.epochs),
                correct: Vec::with_capacity(config.epochs),
            };
            encoded.len()
        ]
    });

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&SparseExample> = if null_mode {
                encoded.iter().collect()
            } else {
                chunk.iter().map(|&i| &encoded[i]).collect()
            };
            let loss = params.loss_and_gradient(&batch, &mut grad);
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { epoch, batch: batch_no });
            }
            optimizer.step(&mut params, &grad);
        }
        let loss = params.loss(&encoded);
        if !loss.is_finite() {
            return Err(ClassifierError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
            });
        }
        loss_history.push(loss);
        if let Some(records) = dynamics.as_mut() {
            for (ex, record) in encoded.iter().zip(records.iter_mut()) {
                let probs = params.proba(ex);
                record.confidences.push(probs[ex.label]);
                record.correct.push(argmax(&probs) == ex.label);
            }
        }
    }

    let weights = (0..params.n_labels)
        .map(|l| params.weights[l * params.n_features..(l + 1) * params.n_features].to_vec())
        .collect();
    let model = TaskModel::from_parts(vocabulary.clone(), config.features, feature_ids, weights, params.bias)?;
    Ok(TrainOutcome {
        model,
        loss_history,
        dynamics,
    })
}
