use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::config::RunConfig;
use super::report::{mean, sample_std, write_json, RunProvenance, SeedFailure};
use super::run::{augmented, load_dataset, make_backend, prepare_seed, tag, BackendFactory, SeedContext, Stage, StageEvent, StageLog};
use super::PipelineError;
use crate::classifier::{evaluate, train};
use crate::corpus::{Dataset, LabeledExample};
use crate::pvi::{estimate_thresholds, filter, FilterMode, ThresholdKind};
use crate::selectors::{
    cartography, cross_val_scores, relabel, select_fraction, CartographyCategory, SelectionStrategy, UncertaintyMethod,
};
use crate::seed;

/// One way of choosing which synthetic examples join the seed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Arm {
    All,
    AllRelabeled,
    GlobalHigh,
    GlobalLow,
    PerIntentHigh,
    PerIntentLow,
    Cartography(CartographyCategory),
    Uncertainty(UncertaintyMethod),
    Random,
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(String::from)).unwrap_or_default()
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::All => f.write_str("all"),
            Arm::AllRelabeled => f.write_str("all_relabeled"),
            Arm::GlobalHigh => f.write_str("global_high"),
            Arm::GlobalLow => f.write_str("global_low"),
            Arm::PerIntentHigh => f.write_str("per_intent_high"),
            Arm::PerIntentLow => f.write_str("per_intent_low"),
            Arm::Cartography(c) => write!(f, "cartography:{}", snake(c)),
            Arm::Uncertainty(m) => write!(f, "uncertainty:{}", snake(m)),
            Arm::Random => f.write_str("random"),
        }
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let quoted = |v: &str| serde_json::Value::String(v.to_string());
        Ok(match s {
            "all" => Arm::All,
            "all_relabeled" => Arm::AllRelabeled,
            "global_high" => Arm::GlobalHigh,
            "global_low" => Arm::GlobalLow,
            "per_intent_high" => Arm::PerIntentHigh,
            "per_intent_low" => Arm::PerIntentLow,
            "random" => Arm::Random,
            _ => match s.split_once(':') {
                Some(("cartography", c)) => {
                    Arm::Cartography(serde_json::from_value(quoted(c)).map_err(|_| format!("unknown cartography category {c:?}"))?)
                }
                Some(("uncertainty", m)) => {
                    Arm::Uncertainty(serde_json::from_value(quoted(m)).map_err(|_| format!("unknown uncertainty method {m:?}"))?)
                }
                _ => return Err(format!("unknown arm {s:?}")),
            },
        })
    }
}

impl From<Arm> for String {
    fn from(a: Arm) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Arm {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub selected: usize,
    pub pool: usize,
    /// Labels changed by the oracle, relabeled arm only.
    pub relabeled: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub per_seed: Vec<ArmSeedResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub provenance: RunProvenance,
    pub config: RunConfig,
    pub arms: Vec<ArmSummary>,
    pub partial: bool,
    pub failures: Vec<SeedFailure>,
    pub stages: Vec<StageEvent>,
}

impl AblationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        write_json(path.as_ref(), self)
    }

    /// Plain-text table of mean ± std accuracy per arm.
    pub fn table(&self) -> String {
        let mut out = format!("{:<34} {:>9} {:>8} {:>9} {:>9}\n", "arm", "accuracy", "std", "macro_f1", "selected");
        for a in &self.arms {
            out.push_str(&format!(
                "{:<34} {:>9.4} {:>8.4} {:>9.4} {:>9.1}\n",
                a.arm.to_string(),
                a.mean_accuracy,
                a.std_accuracy,
                a.mean_macro_f1,
                a.mean_selected
            ));
        }
        out
    }
}

/// The synthetic examples an arm adds to the seed set, and the relabel
/// count where it applies.
pub fn select_arm(
    config: &RunConfig,
    full: &Dataset,
    ctx: &SeedContext,
    arm: Arm,
) -> Result<(Vec<LabeledExample>, Option<usize>), PipelineError> {
    let seed = ctx.seed;
    let pool = &ctx.generation.examples;
    let by_pvi = |kind: ThresholdKind, mode: FilterMode| -> Result<Vec<LabeledExample>, PipelineError> {
        let policy = estimate_thresholds(&ctx.validation, kind).map_err(tag(seed, Stage::EstimateThresholds))?;
        Ok(filter(&ctx.synthetic, &policy, mode))
    };
    let fraction = config.selector_fraction;
    let pick = |indices: Vec<usize>| indices.into_iter().map(|i| pool[i].clone()).collect::<Vec<_>>();
    Ok(match arm {
        Arm::All => (pool.clone(), None),
        Arm::AllRelabeled => {
            let oracle = train(&full.train, &full.vocabulary, &config.train_config(seed::derive(seed, "oracle")), false)
                .map_err(tag(seed, Stage::Select))?
                .model;
            let r = relabel(&oracle, pool);
            (r.examples, Some(r.changed))
        }
        Arm::GlobalHigh => (by_pvi(ThresholdKind::Global, FilterMode::HighPvi)?, None),
        Arm::GlobalLow => (by_pvi(ThresholdKind::Global, FilterMode::LowPvi)?, None),
        Arm::PerIntentHigh => (by_pvi(ThresholdKind::PerIntent, FilterMode::HighPvi)?, None),
        Arm::PerIntentLow => (by_pvi(ThresholdKind::PerIntent, FilterMode::LowPvi)?, None),
        Arm::Cartography(category) => {
            let cfg = crate::classifier::TrainConfig {
                record_dynamics: true,
                ..config.train_config(seed::derive(seed, "cartography"))
            };
            let dynamics = train(pool, &ctx.data.vocabulary, &cfg, false)
                .map_err(tag(seed, Stage::Select))?
                .dynamics
                .unwrap_or_default();
            let labels = cartography(&dynamics, &config.cartography_thresholds()).map_err(tag(seed, Stage::Select))?;
            let chosen = select_fraction(&labels, fraction, SelectionStrategy::Category { category })
                .map_err(tag(seed, Stage::Select))?;
            (pick(chosen), None)
        }
        Arm::Uncertainty(method) => {
            let cfg = config.train_config(seed::derive(seed, "cross_val"));
            let scores = cross_val_scores(pool, &ctx.data.vocabulary, method, config.cv_folds, &cfg)
                .map_err(tag(seed, Stage::Select))?;
            let chosen =
                select_fraction(&scores, fraction, SelectionStrategy::HighestScore).map_err(tag(seed, Stage::Select))?;
            (pick(chosen), None)
        }
        Arm::Random => {
            let items: Vec<crate::selectors::UncertaintyScore> = (0..pool.len())
                .map(|index| crate::selectors::UncertaintyScore {
                    index,
                    fold: 0,
                    method: UncertaintyMethod::LeastConfidence,
                    score: 0.0,
                })
                .collect();
            let chosen = select_fraction(
                &items,
                fraction,
                SelectionStrategy::Random {
                    seed: seed::derive(seed, "random_arm"),
                },
            )
            .map_err(tag(seed, Stage::Select))?;
            (pick(chosen), None)
        }
    })
}

fn ablate_seed(
    config: &RunConfig,
    full: &Dataset,
    backends: &BackendFactory,
    arms: &[Arm],
    seed: u64,
    log: &mut StageLog,
) -> Result<Vec<ArmSeedResult>, PipelineError> {
    let backend = backends(seed)?;
    let ctx = prepare_seed(config, full, backend.as_ref(), seed, log)?;
    let final_config = config.train_config(seed::derive(seed, "final"));
    arms.iter()
        .map(|&arm| {
            let (chosen, relabeled) = select_arm(config, full, &ctx, arm)?;
            log.done(seed, Stage::Select, format!("{arm}: {} of {}", chosen.len(), ctx.generation.examples.len()));
            let training = augmented(&ctx.data.train, &chosen);
            let model = train(&training, &ctx.data.vocabulary, &final_config, false)
                .map_err(tag(seed, Stage::TrainFinal))?
                .model;
            let eval = evaluate(&model, &ctx.data.test).map_err(tag(seed, Stage::Evaluate))?;
            log.done(seed, Stage::Evaluate, format!("{arm}: accuracy {:.4}", eval.accuracy));
            Ok(ArmSeedResult {
                seed,
                accuracy: eval.accuracy,
                macro_f1: eval.macro_f1,
                selected: chosen.len(),
                pool: ctx.generation.examples.len(),
                relabeled,
            })
        })
        .collect()
}

/// Compares selection arms. Within a seed every arm sees the same seed
/// sample, PVI models and synthetic pool; only the selection differs.
pub fn run_ablation(config: &RunConfig, arms: &[Arm], out_dir: Option<&Path>) -> Result<AblationReport, PipelineError> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    run_ablation_with(config, &dataset, &|s| make_backend(config, &dataset, s), arms, out_dir)
}

pub fn run_ablation_with(
    config: &RunConfig,
    dataset: &Dataset,
    backends: &BackendFactory,
    arms: &[Arm],
    out_dir: Option<&Path>,
) -> Result<AblationReport, PipelineError> {
    use rayon::prelude::*;
    config.validate()?;
    if arms.is_empty() {
        return Err(PipelineError::Config("no ablation arms given".into()));
    }
    let one = |seed: u64| {
        let mut log = StageLog::default();
        let r = ablate_seed(config, dataset, backends, arms, seed, &mut log);
        (log, r)
    };
    let outcomes: Vec<_> = if config.parallel_seeds {
        config.seeds.par_iter().map(|&s| one(s)).collect()
    } else {
        config.seeds.iter().map(|&s| one(s)).collect()
    };
    let mut stages = Vec::new();
    let mut rows: Vec<Vec<ArmSeedResult>> = Vec::new();
    let mut failures = Vec::new();
    for (&seed, (log, r)) in config.seeds.iter().zip(outcomes) {
        stages.extend(log.events);
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure::from_error(seed, &e));
            }
        }
    }
    if rows.is_empty() {
        return Err(PipelineError::AllSeedsFailed(failures));
    }
    let summaries = arms
        .iter()
        .enumerate()
        .map(|(i, &arm)| {
            let per_seed: Vec<ArmSeedResult> = rows.iter().map(|r| r[i].clone()).collect();
            let acc: Vec<f64> = per_seed.iter().map(|r| r.accuracy).collect();
            ArmSummary {
                arm,
                mean_accuracy: mean(acc.iter().copied()),
                std_accuracy: sample_std(&acc),
                mean_macro_f1: mean(per_seed.iter().map(|r| r.macro_f1)),
                mean_selected: mean(per_seed.iter().map(|r| r.selected as f64)),
                per_seed,
            }
        })
        .collect();
    let report = AblationReport {
        provenance: RunProvenance::new(config),
        config: config.clone(),
        arms: summaries,
        partial: !failures.is_empty(),
        failures,
        stages,
    };
    if let Some(out) = out_dir {
        std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
        report.write(out.join("ablation.json"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arm_names_round_trip() {
        let arms = [
            Arm::All,
            Arm::AllRelabeled,
            Arm::GlobalHigh,
            Arm::GlobalLow,
            Arm::PerIntentHigh,
            Arm::PerIntentLow,
            Arm::Cartography(CartographyCategory::HardToLearn),
            Arm::Uncertainty(UncertaintyMethod::ContrastiveAl),
            Arm::Random,
        ];
        for a in arms {
            assert_eq!(a.to_string().parse::<Arm>().unwrap(), a);
        }
        assert_eq!(Arm::Cartography(CartographyCategory::EasyToLearn).to_string(), "cartography:easy_to_learn");
        assert!("cartography:nope".parse::<Arm>().is_err());
        assert!("best".parse::<Arm>().is_err());
    }
}
