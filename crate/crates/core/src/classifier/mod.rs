//! The task model family: hashed bag-of-n-grams features feeding a softmax
//! linear classifier trained with AdamW.

mod eval;
mod features;
mod model;
pub mod objective;
mod train;

use std::path::PathBuf;
use thiserror::Error;

pub use eval::{evaluate, score_predictions, Evaluation};
pub use features::{FeatureConfig, FeatureVector};
pub use model::{argmax, log2_softmax, IntentModel, TaskModel, MODEL_FORMAT_VERSION};
pub use train::{train, TrainConfig, TrainOutcome, TrainingDynamicsRecord};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("cannot train on zero examples")]
    EmptyTrainingSet,
    #[error("cannot evaluate on zero examples")]
    EmptyEvaluationSet,
    #[error("label \"{0}\" is not in the model vocabulary")]
    UnknownLabel(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, LabelVocabulary, LabeledExample};

    fn separable_set() -> Vec<LabeledExample> {
        let left = ["apple", "banana", "cherry", "grape", "melon"];
        let right = ["engine", "wheel", "brake", "piston", "gear"];
        let mut out = Vec::new();
        for i in 0..10 {
            out.push(LabeledExample::seed(format!("{} {}", left[i % 5], left[(i + 2) % 5]), "fruit"));
            out.push(LabeledExample::seed(format!("{} {}", right[i % 5], right[(i + 3) % 5]), "car"));
        }
        out
    }

    #[test]
    fn separable_data_fit_exactly() {
        let data = separable_set();
        assert_eq!(data.len(), 20);
        let vocab = build_vocabulary(&data).unwrap();
        let out = train(&data, &vocab, &TrainConfig::default(), false).unwrap();
        let eval = evaluate(&out.model, &data).unwrap();
        assert_eq!(eval.accuracy, 1.0);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = separable_set();
        let vocab = build_vocabulary(&data).unwrap();
        let cfg = TrainConfig {
            seed: 42,
            epochs: 5,
            ..TrainConfig::default()
        };
        let a = train(&data, &vocab, &cfg, false).unwrap().model;
        let b = train(&data, &vocab, &cfg, false).unwrap().model;
        assert_eq!(a, b);
    }

    #[test]
    fn null_mode_learns_marginal() {
        let data: Vec<_> = ["a", "a", "a", "b"]
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledExample::seed(format!("text {i}"), *l))
            .collect();
        let vocab = build_vocabulary(&data).unwrap();
        let short = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let long = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let gap = |cfg: &TrainConfig| {
            let m = train(&data, &vocab, cfg, true).unwrap().model;
            (m.log2_proba_null()[0].exp2() - 0.75).abs()
        };
        let (early, late) = (gap(&short), gap(&long));
        assert!(late < early, "{late} !< {early}");
        assert!(late < 1e-3, "{late}");
    }

    #[test]
    fn null_mode_ignores_text() {
        let data = separable_set();
        let vocab = build_vocabulary(&data).unwrap();
        let m = train(&data, &vocab, &TrainConfig::default(), true).unwrap().model;
        assert_eq!(m.feature_ids(), [m.feature_config().null_id()]);
        assert_eq!(m.log2_proba_text("apple banana"), m.log2_proba_text("engine"));
    }

    #[test]
    fn single_class_data_predicts_that_class() {
        let data: Vec<_> = (0..5).map(|i| LabeledExample::seed(format!("x{i}"), "only")).collect();
        let vocab = LabelVocabulary::from_labels(["only", "other"]);
        let m = train(&data, &vocab, &TrainConfig::default(), false).unwrap().model;
        assert_eq!(m.predict_text("anything"), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let vocab = LabelVocabulary::from_labels(["a"]);
        assert!(matches!(
            train(&[], &vocab, &TrainConfig::default(), false),
            Err(ClassifierError::EmptyTrainingSet)
        ));
        let data = vec![LabeledExample::seed("t", "zzz")];
        assert!(matches!(
            train(&data, &vocab, &TrainConfig::default(), false),
            Err(ClassifierError::UnknownLabel(_))
        ));
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&[LabeledExample::seed("t", "a")], &vocab, &cfg, false),
            Err(ClassifierError::InvalidConfig(_))
        ));
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let data = separable_set();
        let vocab = build_vocabulary(&data).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e308,
            epochs: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, &vocab, &cfg, false),
            Err(ClassifierError::NonFiniteLoss { epoch: 0, .. })
        ));
    }

    #[test]
    fn dynamics_recorded_per_epoch() {
        let data = separable_set();
        let vocab = build_vocabulary(&data).unwrap();
        let cfg = TrainConfig {
            epochs: 6,
            record_dynamics: true,
            ..TrainConfig::default()
        };
        let out = train(&data, &vocab, &cfg, false).unwrap();
        let dyn_ = out.dynamics.unwrap();
        assert_eq!(dyn_.len(), data.len());
        for r in dyn_ {
            assert_eq!(r.epochs(), 6);
            assert!((0.0..=1.0).contains(&r.confidence_mean()));
            assert!((0.0..=1.0).contains(&r.correctness()));
            assert!(r.confidence_std() >= 0.0);
        }
        assert_eq!(out.loss_history.len(), 7);
    }
}
