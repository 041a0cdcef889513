use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::features::{FeatureConfig, FeatureVector};
use super::ClassifierError;
use crate::corpus::LabelVocabulary;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained softmax-linear intent classifier.
///
/// Logically the weight matrix is `[labels × dimension]`. Columns for
/// hashed features that never occurred in training receive zero gradient
/// and stay at their zero initialization, so only the columns listed in
/// `feature_ids` are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    version: u32,
    feature_config: FeatureConfig,
    vocabulary: LabelVocabulary,
    feature_ids: Vec<u32>,
    /// One row per label, `feature_ids.len()` entries each.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Interface the PVI and selection code needs from a model family member.
pub trait IntentModel {
    fn vocabulary(&self) -> &LabelVocabulary;
    /// Base-2 log-probabilities over the vocabulary for an utterance.
    fn log2_proba_text(&self, text: &str) -> Vec<f64>;
    /// Base-2 log-probabilities for the null input.
    fn log2_proba_null(&self) -> Vec<f64>;
}

impl TaskModel {
    /// A model with all parameters zero; it predicts the uniform distribution.
    pub fn zeros(vocabulary: LabelVocabulary, feature_config: FeatureConfig) -> Self {
        let n = vocabulary.len();
        Self {
            version: MODEL_FORMAT_VERSION,
            feature_config,
            vocabulary,
            feature_ids: Vec::new(),
            weights: vec![Vec::new(); n],
            bias: vec![0.0; n],
        }
    }

    /// Assembles a model from explicit parameters. `feature_ids` must be
    /// strictly increasing and each weight row must match its length.
    pub fn from_parts(
        vocabulary: LabelVocabulary,
        feature_config: FeatureConfig,
        feature_ids: Vec<u32>,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    ) -> Result<Self, ClassifierError> {
        let model = Self {
            version: MODEL_FORMAT_VERSION,
            feature_config,
            vocabulary,
            feature_ids,
            weights,
            bias,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |msg: &str| Err(ClassifierError::InvalidModel(msg.to_string()));
        if self.version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::InvalidModel(format!(
                "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
                self.version
            )));
        }
        if self.vocabulary.is_empty() {
            return bad("empty label vocabulary");
        }
        if self.feature_config.dimension < 2 {
            return bad("feature dimension must be at least 2");
        }
        if self.bias.len() != self.vocabulary.len() || self.weights.len() != self.vocabulary.len() {
            return bad("parameter shape does not match vocabulary");
        }
        if self.weights.iter().any(|row| row.len() != self.feature_ids.len()) {
            return bad("weight row length does not match feature ids");
        }
        if !self.feature_ids.windows(2).all(|w| w[0] < w[1]) {
            return bad("feature ids are not strictly increasing");
        }
        if self.feature_ids.last().is_some_and(|&id| id >= self.feature_config.dimension) {
            return bad("feature id outside hashing dimension");
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.feature_config
    }

    pub fn feature_ids(&self) -> &[u32] {
        &self.feature_ids
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        self.feature_config.featurize(text)
    }

    pub fn featurize_null(&self) -> FeatureVector {
        self.feature_config.featurize_null()
    }

    /// Linear scores `W x + b`.
    pub fn scores(&self, input: &FeatureVector) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (id, value) in input.iter() {
            if let Ok(col) = self.feature_ids.binary_search(&id) {
                for (s, row) in out.iter_mut().zip(&self.weights) {
                    *s += row[col] * value;
                }
            }
        }
        out
    }

    /// Log-softmax of the scores, in bits.
    pub fn predict_log2_proba(&self, input: &FeatureVector) -> Vec<f64> {
        log2_softmax(&self.scores(input))
    }

    pub fn predict_proba(&self, input: &FeatureVector) -> Vec<f64> {
        self.predict_log2_proba(input).into_iter().map(f64::exp2).collect()
    }

    /// Most probable label id; ties go to the lowest id.
    pub fn predict(&self, input: &FeatureVector) -> usize {
        argmax(&self.scores(input))
    }

    pub fn predict_text(&self, text: &str) -> usize {
        self.predict(&self.featurize(text))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("model serializes");
        fs::write(path, json).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: TaskModel = serde_json::from_slice(&bytes)
            .map_err(|e| ClassifierError::InvalidModel(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}

impl IntentModel for TaskModel {
    fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    fn log2_proba_text(&self, text: &str) -> Vec<f64> {
        self.predict_log2_proba(&self.featurize(text))
    }

    fn log2_proba_null(&self) -> Vec<f64> {
        self.predict_log2_proba(&self.featurize_null())
    }
}

/// Numerically stable log-softmax, converted to base 2.
pub fn log2_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| (s - lse) / std::f64::consts::LN_2).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
