use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::ablation::Arm;
use super::PipelineError;
use crate::classifier::{FeatureConfig, TrainConfig};
use crate::generator::{DecodingConfig, GenerationSettings};
use crate::metrics::MetricsConfig;
use crate::pvi::{FilterMode, ThresholdKind};
use crate::selectors::CartographyThresholds;

/// Environment variable holding the generation backend token.
pub const AUTH_TOKEN_ENV: &str = "ICDA_BACKEND_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Few(usize),
    Full,
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Shots::Few(k) => s.serialize_u64(*k as u64),
            Shots::Full => s.serialize_str("full"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrName {
    Number(u64),
    Name(String),
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match NumberOrName::deserialize(d)? {
            NumberOrName::Number(k) => Ok(Shots::Few(k as usize)),
            NumberOrName::Name(s) if s.eq_ignore_ascii_case("full") => Ok(Shots::Full),
            NumberOrName::Name(s) => s
                .parse()
                .map(Shots::Few)
                .map_err(|_| de::Error::custom(format!("shots must be a positive integer or \"full\", got {s:?}"))),
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Few(k) => write!(f, "{k}-shot"),
            Shots::Full => f.write_str("full-shot"),
        }
    }
}

/// Either a size name (XS, S, M, L, XL) or an explicit factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Multiplier {
    Named(String),
    Factor(usize),
}

impl Serialize for Multiplier {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Multiplier::Named(n) => s.serialize_str(n),
            Multiplier::Factor(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match NumberOrName::deserialize(d)? {
            NumberOrName::Number(k) => Multiplier::Factor(k as usize),
            NumberOrName::Name(s) => match s.parse() {
                Ok(k) => Multiplier::Factor(k),
                Err(_) => Multiplier::Named(s.to_ascii_uppercase()),
            },
        })
    }
}

/// Factor for a size name under the given shot setting.
pub fn named_multiplier(name: &str, shots: Shots) -> Option<usize> {
    let few = [("XS", 1), ("S", 4), ("M", 16), ("L", 64), ("XL", 128)];
    let full = [("S", 1), ("M", 2), ("L", 4)];
    let table: &[(&str, usize)] = match shots {
        Shots::Few(_) => &few,
        Shots::Full => &full,
    };
    table
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, m)| m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
}

/// Everything a run needs, as one flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with train/validation/test JSONL; the bundled toy corpus when absent.
    pub corpus: Option<PathBuf>,
    pub shots: Shots,
    pub multiplier: Multiplier,
    pub threshold: ThresholdKind,
    pub filter: FilterMode,
    pub seeds: Vec<u64>,
    pub parallel_seeds: bool,

    pub backend: BackendKind,
    pub endpoint: Option<String>,
    /// JSONL utterances the mock recombines. Defaults to the bundled pool
    /// for the toy corpus and to the training split otherwise.
    pub mock_corpus: Option<PathBuf>,
    pub auth_header: String,
    pub timeout_secs: u64,
    pub noise_rate: f64,

    pub typical_p: f64,
    pub repetition_penalty: f64,
    pub max_new_tokens: usize,
    pub stop: Vec<String>,
    pub max_rounds: usize,
    pub max_attempts: usize,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    pub max_batch: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub feature_dimension: u32,
    pub max_ngram: usize,

    pub lm_order: usize,
    pub lm_delta: f64,
    pub lm_min_count: usize,
    pub bleu_max_n: usize,

    pub arms: Vec<Arm>,
    pub selector_fraction: f64,
    pub cv_folds: usize,
    pub cartography_confidence: f64,
    pub cartography_variability: f64,
    pub cartography_correctness: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let decoding = DecodingConfig::default();
        let generation = GenerationSettings::default();
        let metrics = MetricsConfig::default();
        let carto = CartographyThresholds::default();
        Self {
            corpus: None,
            shots: Shots::Few(10),
            multiplier: Multiplier::Named("M".into()),
            threshold: ThresholdKind::PerIntent,
            filter: FilterMode::HighPvi,
            seeds: vec![0, 1, 2, 3, 4],
            parallel_seeds: false,
            backend: BackendKind::Mock,
            endpoint: None,
            mock_corpus: None,
            auth_header: "Authorization".into(),
            timeout_secs: 60,
            noise_rate: 0.3,
            typical_p: decoding.typical_p,
            repetition_penalty: decoding.repetition_penalty,
            max_new_tokens: decoding.max_new_tokens,
            stop: decoding.stop,
            max_rounds: generation.max_rounds,
            max_attempts: generation.max_attempts,
            retry_backoff_ms: generation.retry_backoff.as_millis() as u64,
            max_in_flight: generation.max_in_flight,
            max_batch: generation.max_batch,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            feature_dimension: train.features.dimension,
            max_ngram: train.features.max_order,
            lm_order: metrics.lm_order,
            lm_delta: metrics.lm_delta,
            lm_min_count: metrics.lm_min_count,
            bleu_max_n: metrics.bleu_max_n,
            arms: vec![Arm::All, Arm::PerIntentHigh, Arm::PerIntentLow],
            selector_fraction: 1.0 / 3.0,
            cv_folds: 5,
            cartography_confidence: carto.confidence,
            cartography_variability: carto.variability,
            cartography_correctness: carto.correctness,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        let config: RunConfig = toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        // relative paths resolve against the config file
        if let Some(dir) = path.parent() {
            for p in [&mut config.corpus, &mut config.mock_corpus].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if let Shots::Few(0) = self.shots {
            return bad("shots must be positive".into());
        }
        self.multiplier_factor()?;
        if self.backend == BackendKind::Http && self.endpoint.is_none() {
            return bad("the http backend needs an endpoint".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate must be within [0, 1], got {}", self.noise_rate));
        }
        if !(self.selector_fraction > 0.0 && self.selector_fraction <= 1.0) {
            return bad(format!("selector_fraction must lie in (0, 1], got {}", self.selector_fraction));
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        self.train_config(0).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.generation_settings()
            .decoding
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn multiplier_factor(&self) -> Result<usize, PipelineError> {
        match &self.multiplier {
            Multiplier::Factor(0) => Err(PipelineError::Config("multiplier must be positive".into())),
            Multiplier::Factor(k) => Ok(*k),
            Multiplier::Named(n) => named_multiplier(n, self.shots)
                .ok_or_else(|| PipelineError::Config(format!("multiplier {n:?} is not defined for {}", self.shots))),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            seed,
            record_dynamics: false,
            features: FeatureConfig {
                dimension: self.feature_dimension,
                max_order: self.max_ngram,
            },
        }
    }

    pub fn generation_settings(&self) -> GenerationSettings {
        GenerationSettings {
            decoding: DecodingConfig {
                typical_p: self.typical_p,
                repetition_penalty: self.repetition_penalty,
                max_new_tokens: self.max_new_tokens,
                stop: self.stop.clone(),
            },
            max_rounds: self.max_rounds,
            max_attempts: self.max_attempts,
            retry_backoff: Duration::from_millis(self.retry_backoff_ms),
            max_in_flight: self.max_in_flight,
            max_batch: self.max_batch,
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            lm_order: self.lm_order,
            lm_delta: self.lm_delta,
            lm_min_count: self.lm_min_count,
            bleu_max_n: self.bleu_max_n,
        }
    }

    pub fn cartography_thresholds(&self) -> CartographyThresholds {
        CartographyThresholds {
            confidence: self.cartography_confidence,
            variability: self.cartography_variability,
            correctness: self.cartography_correctness,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
