use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Duration;

use super::config::{BackendKind, RunConfig, Shots, AUTH_TOKEN_ENV};
use super::report::{mean, DiversitySection, GenerationSummary, MeanReport, RunProvenance, RunReport, SeedFailure, SeedReport};
use super::PipelineError;
use crate::classifier::{evaluate, train, TaskModel};
use crate::corpus::{
    dedup_examples, few_shot_sample, load_corpus, load_jsonl, toy_dataset, toy_generator_pool, write_jsonl, Dataset, LabeledExample,
    Split,
};
use crate::generator::{build_prompts, generate, GenerationBackend, GenerationOutcome, HttpBackend, MockBackend, MultiplierPlan};
use crate::metrics::{diversity_report, reference_lm, DiversityReport, MetricsConfig};
use crate::pvi::{compute_pvi_batch, estimate_thresholds, filter, summarize_by_intent, write_records, PviRecord, ThresholdPolicy};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sample,
    TrainConditional,
    TrainNull,
    Generate,
    ScorePvi,
    EstimateThresholds,
    Filter,
    TrainFinal,
    Evaluate,
    Diversity,
    Select,
    WriteArtifacts,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub seed: u64,
    pub stage: Stage,
    pub detail: String,
}

/// Ordered record of completed stages for one seed.
#[derive(Debug, Default)]
pub(crate) struct StageLog {
    pub(crate) events: Vec<StageEvent>,
}

impl StageLog {
    pub(crate) fn done(&mut self, seed: u64, stage: Stage, detail: impl Into<String>) {
        let detail = detail.into();
        log::info!("seed {seed}: {stage}: {detail}");
        self.events.push(StageEvent { seed, stage, detail });
    }
}

pub(crate) fn tag<E>(seed: u64, stage: Stage) -> impl FnOnce(E) -> PipelineError
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |e| PipelineError::Stage {
        seed,
        stage,
        source: Box::new(e),
    }
}

/// Builds a generation backend for one run seed.
pub type BackendFactory<'a> = dyn Fn(u64) -> Result<Box<dyn GenerationBackend>, PipelineError> + Sync + 'a;

pub fn load_dataset(config: &RunConfig) -> Result<Dataset, PipelineError> {
    match &config.corpus {
        Some(dir) => Ok(load_corpus(dir)?),
        None => Ok(toy_dataset()),
    }
}

/// Utterances the mock recombines: `mock_corpus` if set, the bundled pool
/// for the toy corpus, else the training split.
pub fn mock_source(config: &RunConfig, dataset: &Dataset) -> Result<Vec<LabeledExample>, PipelineError> {
    Ok(match (&config.mock_corpus, &config.corpus) {
        (Some(path), _) => load_jsonl(path, Split::Train)?,
        (None, None) => toy_generator_pool(),
        (None, Some(_)) => dataset.train.clone(),
    })
}

/// The backend named in `config`.
pub fn make_backend(config: &RunConfig, dataset: &Dataset, run_seed: u64) -> Result<Box<dyn GenerationBackend>, PipelineError> {
    match config.backend {
        BackendKind::Mock => {
            let source = mock_source(config, dataset)?;
            let mock = MockBackend::new(&source, config.noise_rate, seed::derive(run_seed, "mock"))
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            Ok(Box::new(mock))
        }
        BackendKind::Http => {
            let url = config.endpoint.clone().ok_or_else(|| PipelineError::Config("missing endpoint".into()))?;
            let auth = std::env::var(AUTH_TOKEN_ENV)
                .ok()
                .map(|token| (config.auth_header.clone(), format!("Bearer {token}")));
            let backend = HttpBackend::new(url, auth, Duration::from_secs(config.timeout_secs))
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            Ok(Box::new(backend))
        }
    }
}

/// Stages 1 to 5 for one seed: everything shared by every selection of the
/// synthetic pool.
pub struct SeedContext {
    pub seed: u64,
    pub data: Dataset,
    pub g_prime: TaskModel,
    pub g_null: TaskModel,
    pub generation: GenerationOutcome,
    pub backend: String,
    pub synthetic: Vec<PviRecord>,
    pub validation: Vec<PviRecord>,
}

/// Stage 1: the seed set for one run seed (few-shot sample or full split).
pub fn sample_seeds(config: &RunConfig, full: &Dataset, seed: u64) -> Result<Dataset, PipelineError> {
    match config.shots {
        Shots::Few(k) => few_shot_sample(full, k, seed::derive(seed, "sample")).map_err(tag(seed, Stage::Sample)),
        Shots::Full => Ok(full.clone()),
    }
}

/// Stage 2: g' on the seed examples.
pub fn train_conditional(config: &RunConfig, data: &Dataset, seed: u64) -> Result<TaskModel, PipelineError> {
    Ok(train(&data.train, &data.vocabulary, &config.train_config(seed::derive(seed, "g_prime")), false)
        .map_err(tag(seed, Stage::TrainConditional))?
        .model)
}

/// Stage 3: g* on null inputs with the seed labels.
pub fn train_null(config: &RunConfig, data: &Dataset, seed: u64) -> Result<TaskModel, PipelineError> {
    Ok(train(&data.train, &data.vocabulary, &config.train_config(seed::derive(seed, "g_null")), true)
        .map_err(tag(seed, Stage::TrainNull))?
        .model)
}

/// Stage 4: `m` synthetic examples per seed example.
pub fn generate_synthetic(
    config: &RunConfig,
    backend: &dyn GenerationBackend,
    seeds: &[LabeledExample],
    seed: u64,
) -> Result<(MultiplierPlan, GenerationOutcome), PipelineError> {
    let factor = config.multiplier_factor()?;
    let plan = MultiplierPlan::new(factor, seeds).map_err(tag(seed, Stage::Generate))?;
    let prompts = build_prompts(seeds).map_err(tag(seed, Stage::Generate))?;
    let outcome = generate(backend, &plan, &prompts, &config.generation_settings(), seed::derive(seed, "generate"))
        .map_err(tag(seed, Stage::Generate))?;
    Ok((plan, outcome))
}

/// Stages 1 to 5 for one seed without stage logging.
pub fn prepare(config: &RunConfig, full: &Dataset, backend: &dyn GenerationBackend, seed: u64) -> Result<SeedContext, PipelineError> {
    prepare_seed(config, full, backend, seed, &mut StageLog::default())
}

pub(crate) fn prepare_seed(
    config: &RunConfig,
    full: &Dataset,
    backend: &dyn GenerationBackend,
    seed: u64,
    log: &mut StageLog,
) -> Result<SeedContext, PipelineError> {
    let data = sample_seeds(config, full, seed)?;
    log.done(seed, Stage::Sample, format!("{} seed examples ({})", data.train.len(), config.shots));
    let g_prime = train_conditional(config, &data, seed)?;
    log.done(seed, Stage::TrainConditional, "g' trained on seed examples");
    let g_null = train_null(config, &data, seed)?;
    log.done(seed, Stage::TrainNull, "g* trained on null inputs");
    let (plan, generation) = generate_synthetic(config, backend, &data.train, seed)?;
    log.done(
        seed,
        Stage::Generate,
        format!("{} synthetic of {} requested (m={})", generation.examples.len(), plan.total(), plan.multiplier),
    );

    let synthetic = compute_pvi_batch(&g_prime, &g_null, &generation.examples).map_err(tag(seed, Stage::ScorePvi))?;
    let validation = compute_pvi_batch(&g_prime, &g_null, &data.validation).map_err(tag(seed, Stage::ScorePvi))?;
    log.done(
        seed,
        Stage::ScorePvi,
        format!("{} synthetic and {} validation records", synthetic.len(), validation.len()),
    );
    Ok(SeedContext {
        seed,
        data,
        g_prime,
        g_null,
        generation,
        backend: backend.describe(),
        synthetic,
        validation,
    })
}

/// Seed examples plus `extra`, with repeated (text, label) pairs removed.
pub(crate) fn augmented(seeds: &[LabeledExample], extra: &[LabeledExample]) -> Vec<LabeledExample> {
    let mut all: Vec<LabeledExample> = seeds.iter().chain(extra).cloned().collect();
    dedup_examples(&mut all);
    all
}

fn texts(examples: &[LabeledExample]) -> Vec<&str> {
    examples.iter().map(|e| e.text.as_str()).collect()
}

fn diversity_of(texts: &[&str], lm: &crate::metrics::NgramLanguageModel, metrics: &MetricsConfig) -> Option<DiversityReport> {
    match diversity_report(texts, lm, metrics) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("diversity skipped: {e}");
            None
        }
    }
}

struct SeedArtifacts {
    report: SeedReport,
    synthetic: Vec<LabeledExample>,
    records: Vec<PviRecord>,
    filtered: Vec<LabeledExample>,
    models: Vec<(&'static str, TaskModel)>,
}

fn run_seed(
    config: &RunConfig,
    full: &Dataset,
    backend: &dyn GenerationBackend,
    seed: u64,
    log: &mut StageLog,
) -> Result<SeedArtifacts, PipelineError> {
    let ctx = prepare_seed(config, full, backend, seed, log)?;
    let policy: ThresholdPolicy =
        estimate_thresholds(&ctx.validation, config.threshold).map_err(tag(seed, Stage::EstimateThresholds))?;
    log.done(
        seed,
        Stage::EstimateThresholds,
        format!("{:?} thresholds from {} validation records", config.threshold, ctx.validation.len()),
    );
    let kept = filter(&ctx.synthetic, &policy, config.filter);
    let mut retained_per_intent: BTreeMap<String, usize> = ctx.data.vocabulary.labels().iter().map(|l| (l.clone(), 0)).collect();
    for e in &kept {
        *retained_per_intent.entry(e.label.clone()).or_insert(0) += 1;
    }
    log.done(seed, Stage::Filter, format!("kept {} of {}", kept.len(), ctx.synthetic.len()));

    let training = augmented(&ctx.data.train, &kept);
    let final_model = train(&training, &ctx.data.vocabulary, &config.train_config(seed::derive(seed, "final")), false)
        .map_err(tag(seed, Stage::TrainFinal))?
        .model;
    log.done(seed, Stage::TrainFinal, format!("{} training examples", training.len()));
    let eval = evaluate(&final_model, &ctx.data.test).map_err(tag(seed, Stage::Evaluate))?;
    log.done(seed, Stage::Evaluate, format!("accuracy {:.4}", eval.accuracy));

    let metrics = config.metrics_config();
    let seed_texts = texts(&ctx.data.train);
    // perplexity is measured under a model of the test split
    let diversity = match reference_lm(&texts(&ctx.data.test), &metrics) {
        Ok(lm) => DiversitySection {
            seed: diversity_of(&seed_texts, &lm, &metrics),
            synthetic: diversity_of(&texts(&ctx.generation.examples), &lm, &metrics),
            filtered: diversity_of(&texts(&kept), &lm, &metrics),
        },
        Err(e) => {
            log::warn!("diversity skipped: {e}");
            DiversitySection::default()
        }
    };
    log.done(seed, Stage::Diversity, "seed, synthetic and filtered corpora");

    let report = SeedReport {
        seed,
        backend: ctx.backend.clone(),
        accuracy: eval.accuracy,
        macro_f1: eval.macro_f1,
        per_intent_f1: eval.per_intent_f1,
        undefined_f1: eval.undefined_f1,
        seed_examples: ctx.data.train.len(),
        generation: GenerationSummary::from(&ctx.generation),
        thresholds: policy,
        pvi_synthetic: summarize_by_intent(&ctx.synthetic),
        pvi_validation: summarize_by_intent(&ctx.validation),
        retained: kept.len(),
        dropped: ctx.synthetic.len() - kept.len(),
        retained_per_intent,
        empty_augmentation: kept.is_empty(),
        training_examples: training.len(),
        diversity,
    };
    Ok(SeedArtifacts {
        report,
        synthetic: ctx.generation.examples,
        records: ctx.synthetic,
        filtered: kept,
        models: vec![("g_prime", ctx.g_prime), ("g_null", ctx.g_null), ("final", final_model)],
    })
}

fn write_seed_artifacts(dir: &Path, a: &SeedArtifacts) -> Result<(), PipelineError> {
    let models = dir.join("models");
    std::fs::create_dir_all(&models).map_err(|e| PipelineError::io(&models, e))?;
    for (name, model) in &a.models {
        model.save(models.join(format!("{name}.json")))?;
    }
    write_jsonl(dir.join("synthetic.jsonl"), &a.synthetic)?;
    write_records(dir.join("pvi.jsonl"), &a.records)?;
    write_jsonl(dir.join("filtered.jsonl"), &a.filtered)?;
    Ok(())
}

/// Directory for one seed's artifacts: `out` itself for single-seed runs,
/// `out/seed-<n>` otherwise.
pub fn seed_dir(out: &Path, config: &RunConfig, seed: u64) -> std::path::PathBuf {
    if config.seeds.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("seed-{seed}"))
    }
}

/// Runs augmentation with PVI filtering for every configured seed.
pub fn run_icda(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    run_icda_with(config, &dataset, &|s| make_backend(config, &dataset, s), out_dir)
}

/// As [`run_icda`] with an explicit dataset and backend source.
pub fn run_icda_with(
    config: &RunConfig,
    dataset: &Dataset,
    backends: &BackendFactory,
    out_dir: Option<&Path>,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let one = |seed: u64| -> (StageLog, Result<SeedReport, PipelineError>) {
        let mut log = StageLog::default();
        let result = (|| {
            let backend = backends(seed)?;
            let artifacts = run_seed(config, dataset, backend.as_ref(), seed, &mut log)?;
            if let Some(out) = out_dir {
                write_seed_artifacts(&seed_dir(out, config, seed), &artifacts).map_err(|e| PipelineError::Stage {
                    seed,
                    stage: Stage::WriteArtifacts,
                    source: Box::new(e),
                })?;
                log.done(seed, Stage::WriteArtifacts, "models, synthetic, pvi and filtered files");
            }
            Ok(artifacts.report)
        })();
        (log, result)
    };
    let outcomes: Vec<(StageLog, Result<SeedReport, PipelineError>)> = if config.parallel_seeds {
        config.seeds.par_iter().map(|&s| one(s)).collect()
    } else {
        config.seeds.iter().map(|&s| one(s)).collect()
    };

    let mut stages = Vec::new();
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for (&seed, (log, result)) in config.seeds.iter().zip(outcomes) {
        stages.extend(log.events);
        match result {
            Ok(r) => seeds.push(r),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure::from_error(seed, &e));
            }
        }
    }
    if seeds.is_empty() {
        return Err(PipelineError::AllSeedsFailed(failures));
    }
    let mean = MeanReport {
        accuracy: mean(seeds.iter().map(|s| s.accuracy)),
        macro_f1: mean(seeds.iter().map(|s| s.macro_f1)),
        per_intent_f1: dataset
            .vocabulary
            .labels()
            .iter()
            .map(|l| (l.clone(), mean(seeds.iter().map(|s| s.per_intent_f1.get(l).copied().unwrap_or(0.0)))))
            .collect(),
    };
    let report = RunReport {
        provenance: RunProvenance::new(config),
        config: config.clone(),
        empty_augmentation: seeds.iter().any(|s| s.empty_augmentation),
        partial: !failures.is_empty(),
        seeds,
        mean,
        failures,
        stages,
    };
    if let Some(out) = out_dir {
        report.write(out.join("report.json"))?;
    }
    Ok(report)
}
