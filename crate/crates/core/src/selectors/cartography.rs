use serde::{Deserialize, Serialize};

use super::SelectorError;
use crate::classifier::TrainingDynamicsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartographyCategory {
    EasyToLearn,
    Ambiguous,
    HardToLearn,
    LowCorrectness,
}

impl CartographyCategory {
    pub const ALL: [CartographyCategory; 4] = [
        CartographyCategory::EasyToLearn,
        CartographyCategory::Ambiguous,
        CartographyCategory::HardToLearn,
        CartographyCategory::LowCorrectness,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartographyThresholds {
    /// Mean gold-label confidence at or above this is "high".
    pub confidence: f64,
    /// Confidence standard deviation strictly above this is "high".
    pub variability: f64,
    /// Correctness strictly below this is "low".
    pub correctness: f64,
}

impl Default for CartographyThresholds {
    fn default() -> Self {
        Self {
            confidence: 0.5,
            variability: 0.2,
            correctness: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartographyLabel {
    pub index: usize,
    pub category: CartographyCategory,
    pub confidence_mean: f64,
    pub confidence_std: f64,
    pub correctness: f64,
}

/// Categorizes each training trace. Low correctness wins over ambiguity,
/// which wins over the easy/hard split on mean confidence.
pub fn cartography(
    dynamics: &[TrainingDynamicsRecord],
    thresholds: &CartographyThresholds,
) -> Result<Vec<CartographyLabel>, SelectorError> {
    dynamics
        .iter()
        .enumerate()
        .map(|(index, d)| {
            if d.epochs() < 2 || d.correct.len() != d.epochs() {
                return Err(SelectorError::TooFewEpochs {
                    index,
                    epochs: d.epochs(),
                });
            }
            let (mean, std, correctness) = (d.confidence_mean(), d.confidence_std(), d.correctness());
            let category = if correctness < thresholds.correctness {
                CartographyCategory::LowCorrectness
            } else if std > thresholds.variability {
                CartographyCategory::Ambiguous
            } else if mean >= thresholds.confidence {
                CartographyCategory::EasyToLearn
            } else {
                CartographyCategory::HardToLearn
            };
            Ok(CartographyLabel {
                index,
                category,
                confidence_mean: mean,
                confidence_std: std,
                correctness,
            })
        })
        .collect()
}
