//! End-to-end runs: configuration, seeding, artifacts and reports.

mod ablation;
mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};
use thiserror::Error;

pub use ablation::{run_ablation, run_ablation_with, select_arm, AblationReport, Arm, ArmSeedResult, ArmSummary};
pub use config::{named_multiplier, BackendKind, Multiplier, RunConfig, Shots, AUTH_TOKEN_ENV};
pub use report::{
    mean, sample_std, DiversitySection, GenerationSummary, MeanReport, RunProvenance, RunReport, SeedFailure, SeedReport,
};
pub use run::{
    generate_synthetic, load_dataset, make_backend, mock_source, prepare, sample_seeds, train_conditional, train_null, run_icda, run_icda_with, seed_dir,
    BackendFactory, SeedContext, Stage, StageEvent,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Pvi(#[from] crate::pvi::PviError),
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
    #[error("seed {seed}, stage {stage}: {source}")]
    Stage {
        seed: u64,
        stage: Stage,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("every seed failed: {}", .0.iter().map(|f| f.message.as_str()).collect::<Vec<_>>().join("; "))]
    AllSeedsFailed(Vec<SeedFailure>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
