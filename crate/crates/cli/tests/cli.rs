use std::path::Path;
use std::process::{Command, Output};

fn icda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icda"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn score_before_train_names_the_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = icda(dir.path(), &["score"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("missing artifact") && err.contains("g_prime.json") && err.contains("icda train"), "{err}");
}

#[test]
fn stepwise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    for step in ["train", "generate", "score", "filter"] {
        let out = icda(dir.path(), &["--seed", "3", step]);
        assert!(out.status.success(), "{step}: {}", stderr(&out));
    }
    for f in ["models/g_prime.json", "models/g_null.json", "seeds.jsonl", "synthetic.jsonl", "pvi.jsonl", "validation_pvi.jsonl", "thresholds.json", "filtered.jsonl"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let out = icda(dir.path(), &["--seed", "3", "diversity"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("self_bleu"));
}

#[test]
fn augment_writes_report_and_filtered_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = icda(dir.path(), &["--seed", "0", "augment"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("report.json").is_file());
    assert!(dir.path().join("filtered.jsonl").is_file());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"].as_array().unwrap().len(), 1);
    let out = icda(dir.path(), &["report"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn ablate_reports_every_seed_and_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "seeds = [0, 1, 2, 3, 4]\nmultiplier = \"XS\"\n").unwrap();
    let out = icda(dir.path(), &["--config", config.to_str().unwrap(), "ablate", "--arms", "all,per_intent_high"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("ablation.json")).unwrap()).unwrap();
    let arms = report["arms"].as_array().unwrap();
    assert_eq!(arms.len(), 2);
    for arm in arms {
        assert_eq!(arm["per_seed"].as_array().unwrap().len(), 5);
        assert!(arm["mean_accuracy"].as_f64().is_some());
    }
}

#[test]
fn selectors_write_scores() {
    let dir = tempfile::tempdir().unwrap();
    for step in ["train", "generate"] {
        assert!(icda(dir.path(), &["--seed", "1", step]).status.success());
    }
    let out = icda(dir.path(), &["--seed", "1", "selectors", "--method", "uncertainty:breaking_ties"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("uncertainty.jsonl").is_file());
    let out = icda(dir.path(), &["--seed", "1", "selectors", "--method", "cartography"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("cartography.jsonl").is_file());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = icda(dir.path(), &["augment", "--no-such-flag"]);
    assert!(!out.status.success());
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "unknown_key = 1\n").unwrap();
    let out = icda(dir.path(), &["--config", config.to_str().unwrap(), "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown_key"), "{}", stderr(&out));
}

#[test]
fn ingest_summarizes_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = icda(dir.path(), &["ingest"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.to_string().contains("288"), "{v}");
}
