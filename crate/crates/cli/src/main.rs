use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use icda::classifier::{evaluate, TaskModel};
use icda::corpus::{load_jsonl, load_jsonl_as, write_jsonl, Dataset, LabeledExample, Provenance, Split};
use icda::metrics::{diversity_report, reference_lm};
use icda::pipeline::{
    generate_synthetic, load_dataset, make_backend, run_ablation, run_icda, sample_seeds, train_conditional, train_null, AblationReport,
    Arm, RunConfig, RunReport,
};
use icda::pvi::{compute_pvi_batch, estimate_thresholds, filter, read_records, write_records, ThresholdPolicy};
use icda::selectors::{
    cartography, cross_val_scores, write_cartography, write_uncertainty, CartographyCategory, UncertaintyMethod,
};

/// Generate, score and filter synthetic training utterances for intent classifiers.
#[derive(Parser)]
#[command(name = "icda", version)]
struct Cli {
    /// Run configuration (flat TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use this single run seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "icda-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus and print split statistics.
    Ingest,
    /// Sample seed examples and train g', g* and the seed-only baseline.
    Train,
    /// Generate synthetic examples from the sampled seeds.
    Generate,
    /// Score synthetic and validation examples with PVI.
    Score,
    /// Estimate thresholds on validation PVI and filter the synthetic pool.
    Filter,
    /// Full augmentation run over every configured seed.
    Augment,
    /// Compare selection arms over every configured seed.
    Ablate {
        /// Arms such as all, per_intent_high, cartography:ambiguous,
        /// uncertainty:breaking_ties. Defaults to the configured arms.
        #[arg(long, value_delimiter = ',')]
        arms: Vec<Arm>,
    },
    /// Diversity metrics of a JSONL corpus next to the seed examples.
    Diversity {
        /// Corpus to measure; defaults to synthetic.jsonl in the out dir.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Cross-validated uncertainty or cartography for the synthetic pool.
    Selectors {
        /// uncertainty:<method> or cartography.
        #[arg(long, default_value = "uncertainty:least_confidence")]
        method: String,
    },
    /// Summarize report.json or ablation.json from the out dir.
    Report,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    config.validate()?;
    Ok(config)
}

/// Fails with a message naming `path` and the step that writes it.
fn require(path: &Path, made_by: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing artifact {} (run `icda {made_by}` first)", path.display());
    }
    Ok(())
}

/// Writes a line to stdout; a closed pipe ends the process quietly.
fn emit(line: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

macro_rules! say {
    ($($arg:tt)*) => {
        emit(&format!($($arg)*))?
    };
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    fn g_prime(&self) -> PathBuf {
        self.models().join("g_prime.json")
    }
    fn g_null(&self) -> PathBuf {
        self.models().join("g_null.json")
    }
    fn seeds(&self) -> PathBuf {
        self.root.join("seeds.jsonl")
    }
    fn synthetic(&self) -> PathBuf {
        self.root.join("synthetic.jsonl")
    }
    fn pvi(&self) -> PathBuf {
        self.root.join("pvi.jsonl")
    }
    fn validation_pvi(&self) -> PathBuf {
        self.root.join("validation_pvi.jsonl")
    }
    fn thresholds(&self) -> PathBuf {
        self.root.join("thresholds.json")
    }
    fn filtered(&self) -> PathBuf {
        self.root.join("filtered.jsonl")
    }
}

/// The dataset with its training split replaced by the saved seed examples.
fn seeded_dataset(full: &Dataset, layout: &Layout) -> Result<Dataset> {
    require(&layout.seeds(), "train")?;
    Ok(Dataset {
        train: load_jsonl(layout.seeds(), Split::Train)?,
        ..full.clone()
    })
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let seed = config.seeds[0];
    let layout = Layout {
        root: cli.out_dir.clone(),
    };
    std::fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
    match cli.command {
        Command::Ingest => {
            let ds = load_dataset(&config)?;
            let mut per_intent: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
            for (i, split) in [&ds.train, &ds.validation, &ds.test].into_iter().enumerate() {
                for e in split {
                    per_intent.entry(&e.label).or_default()[i] += 1;
                }
            }
            #[derive(Serialize)]
            struct Summary<'a> {
                intents: usize,
                train: usize,
                validation: usize,
                test: usize,
                per_intent: BTreeMap<&'a str, [usize; 3]>,
            }
            print_json(&Summary {
                intents: ds.vocabulary.len(),
                train: ds.train.len(),
                validation: ds.validation.len(),
                test: ds.test.len(),
                per_intent,
            })?;
        }
        Command::Train => {
            let full = load_dataset(&config)?;
            let data = sample_seeds(&config, &full, seed)?;
            let g_prime = train_conditional(&config, &data, seed)?;
            let g_null = train_null(&config, &data, seed)?;
            std::fs::create_dir_all(layout.models())?;
            g_prime.save(layout.g_prime())?;
            g_null.save(layout.g_null())?;
            write_jsonl(layout.seeds(), &data.train)?;
            let eval = evaluate(&g_prime, &data.test)?;
            say!(
                "seed {seed}: {} seed examples, baseline test accuracy {:.4}, macro-F1 {:.4}",
                data.train.len(),
                eval.accuracy,
                eval.macro_f1
            );
        }
        Command::Generate => {
            let full = load_dataset(&config)?;
            let data = seeded_dataset(&full, &layout)?;
            let backend = make_backend(&config, &full, seed)?;
            let (plan, outcome) = generate_synthetic(&config, backend.as_ref(), &data.train, seed)?;
            write_jsonl(layout.synthetic(), &outcome.examples)?;
            say!(
                "{} synthetic examples of {} requested ({} requests) -> {}",
                outcome.examples.len(),
                plan.total(),
                outcome.requests,
                layout.synthetic().display()
            );
            for (intent, (got, want)) in &outcome.shortfalls {
                eprintln!("warning: {intent} produced {got} of {want}");
            }
        }
        Command::Score => {
            require(&layout.g_prime(), "train")?;
            require(&layout.g_null(), "train")?;
            require(&layout.synthetic(), "generate")?;
            let g_prime = TaskModel::load(layout.g_prime())?;
            let g_null = TaskModel::load(layout.g_null())?;
            let full = load_dataset(&config)?;
            let synthetic = load_jsonl_as(layout.synthetic(), Split::Train, Provenance::Synthetic)?;
            let records = compute_pvi_batch(&g_prime, &g_null, &synthetic)?;
            let validation = compute_pvi_batch(&g_prime, &g_null, &full.validation)?;
            write_records(layout.pvi(), &records)?;
            write_records(layout.validation_pvi(), &validation)?;
            say!("scored {} synthetic and {} validation examples", records.len(), validation.len());
        }
        Command::Filter => {
            require(&layout.pvi(), "score")?;
            require(&layout.validation_pvi(), "score")?;
            let records = read_records(layout.pvi(), Provenance::Synthetic)?;
            let validation = read_records(layout.validation_pvi(), Provenance::Seed)?;
            let policy: ThresholdPolicy = estimate_thresholds(&validation, config.threshold)?;
            let kept = filter(&records, &policy, config.filter);
            write_json(&layout.thresholds(), &policy)?;
            write_jsonl(layout.filtered(), &kept)?;
            say!("kept {} of {} -> {}", kept.len(), records.len(), layout.filtered().display());
        }
        Command::Augment => {
            let report = run_icda(&config, Some(&layout.root))?;
            print!("{}", summarize_run(&report));
        }
        Command::Ablate { arms } => {
            let arms = if arms.is_empty() { config.arms.clone() } else { arms };
            let report = run_ablation(&config, &arms, Some(&layout.root))?;
            print!("{}", report.table());
        }
        Command::Diversity { input } => {
            let full = load_dataset(&config)?;
            let data = seeded_dataset(&full, &layout)?;
            let input = input.unwrap_or_else(|| layout.synthetic());
            require(&input, "generate")?;
            let corpus = load_jsonl(&input, Split::Train)?;
            let metrics = config.metrics_config();
            let test: Vec<&str> = data.test.iter().map(|e| e.text.as_str()).collect();
            let lm = reference_lm(&test, &metrics)?;
            let texts = |v: &[LabeledExample]| v.iter().map(|e| e.text.clone()).collect::<Vec<_>>();
            let mut out = BTreeMap::new();
            out.insert("seed", diversity_report(&texts(&data.train), &lm, &metrics)?);
            out.insert("input", diversity_report(&texts(&corpus), &lm, &metrics)?);
            print_json(&out)?;
        }
        Command::Selectors { method } => {
            require(&layout.synthetic(), "generate")?;
            let full = load_dataset(&config)?;
            let pool = load_jsonl_as(layout.synthetic(), Split::Train, Provenance::Synthetic)?;
            let train_config = config.train_config(icda::seed::derive(seed, "selectors"));
            if method == "cartography" {
                let cfg = icda::classifier::TrainConfig {
                    record_dynamics: true,
                    ..train_config
                };
                let dynamics = icda::classifier::train(&pool, &full.vocabulary, &cfg, false)?
                    .dynamics
                    .unwrap_or_default();
                let labels = cartography(&dynamics, &config.cartography_thresholds())?;
                let path = layout.root.join("cartography.jsonl");
                write_cartography(&path, &pool, &labels)?;
                let mut counts: BTreeMap<CartographyCategory, usize> = BTreeMap::new();
                for l in &labels {
                    *counts.entry(l.category).or_default() += 1;
                }
                say!("{counts:?} -> {}", path.display());
            } else {
                let name = method.strip_prefix("uncertainty:").unwrap_or(&method);
                let m: UncertaintyMethod = serde_json::from_value(serde_json::Value::String(name.to_string()))
                    .with_context(|| format!("unknown selector method {method:?}"))?;
                let scores = cross_val_scores(&pool, &full.vocabulary, m, config.cv_folds, &train_config)?;
                let path = layout.root.join("uncertainty.jsonl");
                write_uncertainty(&path, &pool, &scores)?;
                say!("scored {} examples -> {}", scores.len(), path.display());
            }
        }
        Command::Report => {
            let run_path = layout.root.join("report.json");
            let ablation_path = layout.root.join("ablation.json");
            if run_path.exists() {
                let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&run_path)?)?;
                print!("{}", summarize_run(&report));
            } else if ablation_path.exists() {
                let report: AblationReport = serde_json::from_str(&std::fs::read_to_string(&ablation_path)?)?;
                print!("{}", report.table());
            } else {
                bail!(
                    "missing artifact {} (run `icda augment` or `icda ablate` first)",
                    run_path.display()
                );
            }
        }
    }
    Ok(())
}

fn summarize_run(report: &RunReport) -> String {
    let mut out = format!("{:>6} {:>9} {:>9} {:>9} {:>9}\n", "seed", "accuracy", "macro_f1", "retained", "dropped");
    for s in &report.seeds {
        out.push_str(&format!(
            "{:>6} {:>9.4} {:>9.4} {:>9} {:>9}\n",
            s.seed, s.accuracy, s.macro_f1, s.retained, s.dropped
        ));
    }
    out.push_str(&format!("{:>6} {:>9.4} {:>9.4}\n", "mean", report.mean.accuracy, report.mean.macro_f1));
    if report.partial {
        out.push_str(&format!("partial: {} seed(s) failed\n", report.failures.len()));
    }
    if report.empty_augmentation {
        out.push_str("note: some seed kept no synthetic examples\n");
    }
    out
}
