use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::config::RunConfig;
use super::run::{Stage, StageEvent};
use super::PipelineError;
use crate::generator::{GenerationOutcome, TEMPLATE_VERSION};
use crate::metrics::DiversityReport;
use crate::pvi::{PviSummary, ThresholdPolicy};

/// Arithmetic mean, summed in the given order; NaN for no values.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub config_hash: String,
    pub template_version: String,
    pub tool_version: String,
}

impl RunProvenance {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            config_hash: config.hash(),
            template_version: TEMPLATE_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generated: usize,
    pub requests: usize,
    pub completions: usize,
    pub empty_dropped: usize,
    pub duplicates_dropped: usize,
    pub shortfalls: BTreeMap<String, (usize, usize)>,
}

impl From<&GenerationOutcome> for GenerationSummary {
    fn from(g: &GenerationOutcome) -> Self {
        Self {
            generated: g.examples.len(),
            requests: g.requests,
            completions: g.completions,
            empty_dropped: g.empty_dropped,
            duplicates_dropped: g.duplicates_dropped,
            shortfalls: g.shortfalls.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiversitySection {
    pub seed: Option<DiversityReport>,
    pub synthetic: Option<DiversityReport>,
    pub filtered: Option<DiversityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub backend: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_intent_f1: BTreeMap<String, f64>,
    pub undefined_f1: Vec<String>,
    pub seed_examples: usize,
    pub generation: GenerationSummary,
    pub thresholds: ThresholdPolicy,
    pub pvi_synthetic: BTreeMap<String, PviSummary>,
    pub pvi_validation: BTreeMap<String, PviSummary>,
    pub retained: usize,
    pub dropped: usize,
    pub retained_per_intent: BTreeMap<String, usize>,
    /// No synthetic example survived filtering; the final model saw seeds only.
    pub empty_augmentation: bool,
    pub training_examples: usize,
    pub diversity: DiversitySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_intent_f1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub stage: Option<Stage>,
    pub message: String,
}

impl SeedFailure {
    pub fn from_error(seed: u64, e: &PipelineError) -> Self {
        Self {
            seed,
            stage: match e {
                PipelineError::Stage { stage, .. } => Some(*stage),
                _ => None,
            },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: RunProvenance,
    pub config: RunConfig,
    /// Mean over the seeds that completed.
    pub mean: MeanReport,
    pub seeds: Vec<SeedReport>,
    /// Some seed failed; `mean` covers the rest.
    pub partial: bool,
    pub failures: Vec<SeedFailure>,
    pub empty_augmentation: bool,
    pub stages: Vec<StageEvent>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut json = serde_json::to_string_pretty(value).expect("report serializes");
    json.push('\n');
    std::fs::write(path, json).map_err(|e| PipelineError::io(path, e))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        write_json(path.as_ref(), self)
    }
}
