//! Pointwise V-information scoring, threshold estimation and filtering.
//!
//! For an example `(x, y)`, `PVI = log2 g'[x](y) - log2 g*[null](y)`, where
//! `g'` was trained on real inputs and `g*` on the null input only. Examples
//! whose PVI is strictly above the threshold of their intent are kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::classifier::IntentModel;
use crate::corpus::{self, CorpusError, LabeledExample, Provenance};

#[derive(Debug, Error)]
pub enum PviError {
    #[error("label \"{0}\" is not in the model vocabulary")]
    UnknownLabel(String),
    #[error("the conditional and null models use different label vocabularies")]
    VocabularyMismatch,
    #[error("cannot estimate thresholds from zero records")]
    NoValidationRecords,
    #[error(transparent)]
    Io(#[from] CorpusError),
    #[error("pvi record line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// PVI of one example together with the two log-probabilities it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PviRecord {
    pub example: LabeledExample,
    /// `log2 g'[x](y)`
    pub log2_conditional: f64,
    /// `log2 g*[null](y)`
    pub log2_null: f64,
    pub pvi: f64,
}

impl PviRecord {
    pub fn new(example: LabeledExample, log2_conditional: f64, log2_null: f64) -> Self {
        Self {
            example,
            log2_conditional,
            log2_null,
            pvi: log2_conditional - log2_null,
        }
    }
}

fn check_vocabularies<M: IntentModel>(g_prime: &M, g_star: &M) -> Result<(), PviError> {
    if g_prime.vocabulary() != g_star.vocabulary() {
        return Err(PviError::VocabularyMismatch);
    }
    Ok(())
}

pub fn compute_pvi<M: IntentModel>(g_prime: &M, g_star: &M, example: &LabeledExample) -> Result<PviRecord, PviError> {
    check_vocabularies(g_prime, g_star)?;
    let null = g_star.log2_proba_null();
    score_one(g_prime, &null, example)
}

fn score_one<M: IntentModel>(g_prime: &M, null: &[f64], example: &LabeledExample) -> Result<PviRecord, PviError> {
    let id = g_prime
        .vocabulary()
        .id(&example.label)
        .ok_or_else(|| PviError::UnknownLabel(example.label.clone()))?;
    let conditional = g_prime.log2_proba_text(&example.text)[id];
    let mut example = example.clone();
    let record = PviRecord::new(example.clone(), conditional, null[id]);
    example.pvi = Some(record.pvi);
    Ok(PviRecord { example, ..record })
}

/// Scores every example; output order matches input order.
pub fn compute_pvi_batch<M: IntentModel + Sync>(
    g_prime: &M,
    g_star: &M,
    examples: &[LabeledExample],
) -> Result<Vec<PviRecord>, PviError> {
    check_vocabularies(g_prime, g_star)?;
    let null = g_star.log2_proba_null();
    examples.par_iter().map(|e| score_one(g_prime, &null, e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Global,
    PerIntent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Keep `pvi > threshold`.
    HighPvi,
    /// Keep `pvi <= threshold`.
    LowPvi,
}

/// Threshold function over intents. Intents without their own entry use
/// `fallback`, which equals the global mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: ThresholdKind,
    pub global_value: f64,
    pub per_intent: BTreeMap<String, f64>,
    pub fallback: f64,
}

impl ThresholdPolicy {
    pub fn global(value: f64) -> Self {
        Self {
            kind: ThresholdKind::Global,
            global_value: value,
            per_intent: BTreeMap::new(),
            fallback: value,
        }
    }

    pub fn threshold(&self, intent: &str) -> f64 {
        match self.kind {
            ThresholdKind::Global => self.global_value,
            ThresholdKind::PerIntent => self.per_intent.get(intent).copied().unwrap_or(self.fallback),
        }
    }
}

/// Mean PVI over all records (global) or per intent with the global mean as
/// fallback. Feed this real validation data, not synthetic examples.
pub fn estimate_thresholds(records: &[PviRecord], kind: ThresholdKind) -> Result<ThresholdPolicy, PviError> {
    if records.is_empty() {
        return Err(PviError::NoValidationRecords);
    }
    let global = records.iter().map(|r| r.pvi).sum::<f64>() / records.len() as f64;
    let mut policy = ThresholdPolicy::global(global);
    if kind == ThresholdKind::PerIntent {
        policy.kind = kind;
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for r in records {
            let e = sums.entry(&r.example.label).or_insert((0.0, 0));
            e.0 += r.pvi;
            e.1 += 1;
        }
        policy.per_intent = sums
            .into_iter()
            .map(|(k, (s, n))| (k.to_string(), s / n as f64))
            .collect();
    }
    Ok(policy)
}

pub fn passes(record: &PviRecord, policy: &ThresholdPolicy, mode: FilterMode) -> bool {
    let above = record.pvi > policy.threshold(&record.example.label);
    match mode {
        FilterMode::HighPvi => above,
        FilterMode::LowPvi => !above,
    }
}

/// Examples selected by `mode`, in input order, each carrying its PVI.
pub fn filter(records: &[PviRecord], policy: &ThresholdPolicy, mode: FilterMode) -> Vec<LabeledExample> {
    records
        .iter()
        .filter(|r| passes(r, policy, mode))
        .map(|r| LabeledExample {
            pvi: Some(r.pvi),
            ..r.example.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PviSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_by_intent(records: &[PviRecord]) -> BTreeMap<String, PviSummary> {
    let mut out: BTreeMap<String, PviSummary> = BTreeMap::new();
    for r in records {
        let s = out.entry(r.example.label.clone()).or_insert(PviSummary {
            count: 0,
            mean: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        });
        s.count += 1;
        s.mean += r.pvi;
        s.min = s.min.min(r.pvi);
        s.max = s.max.max(r.pvi);
    }
    for s in out.values_mut() {
        s.mean /= s.count as f64;
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct PviRow {
    text: String,
    label: String,
    log2_conditional: f64,
    log2_null: f64,
    pvi: f64,
}

/// Writes `{"text", "label", "log2_conditional", "log2_null", "pvi"}` rows.
pub fn write_records(path: impl AsRef<Path>, records: &[PviRecord]) -> Result<(), PviError> {
    let rows: Vec<PviRow> = records
        .iter()
        .map(|r| PviRow {
            text: r.example.text.clone(),
            label: r.example.label.clone(),
            log2_conditional: r.log2_conditional,
            log2_null: r.log2_null,
            pvi: r.pvi,
        })
        .collect();
    corpus::write_rows(path, &rows)?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>, provenance: Provenance) -> Result<Vec<PviRecord>, PviError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| {
        PviError::Io(CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let row: PviRow = serde_json::from_str(line).map_err(|e| PviError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let mut example = LabeledExample::seed(row.text, row.label);
            example.provenance = provenance;
            example.pvi = Some(row.pvi);
            Ok(PviRecord {
                example,
                log2_conditional: row.log2_conditional,
                log2_null: row.log2_null,
                pvi: row.pvi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{FeatureConfig, TaskModel};
    use crate::corpus::LabelVocabulary;

    fn rec(label: &str, pvi: f64) -> PviRecord {
        PviRecord::new(LabeledExample::synthetic(format!("t{pvi}"), label), pvi, 0.0)
    }

    #[test]
    fn one_bit_example() {
        let r = PviRecord::new(LabeledExample::synthetic("x", "y"), 0.5f64.log2(), 0.25f64.log2());
        assert_eq!(r.pvi, 1.0);
        let same = PviRecord::new(LabeledExample::synthetic("x", "y"), -1.7, -1.7);
        assert_eq!(same.pvi, 0.0);
    }

    #[test]
    fn thresholds_are_means() {
        let per = estimate_thresholds(&[rec("a", 2.0), rec("a", 4.0)], ThresholdKind::PerIntent).unwrap();
        assert_eq!(per.threshold("a"), 3.0);
        let global = estimate_thresholds(&[rec("a", 1.0), rec("b", 2.0), rec("c", 3.0)], ThresholdKind::Global).unwrap();
        assert_eq!(global.threshold("a"), 2.0);
        assert_eq!(global.threshold("zzz"), 2.0);
        assert!(matches!(
            estimate_thresholds(&[], ThresholdKind::Global),
            Err(PviError::NoValidationRecords)
        ));
    }

    #[test]
    fn per_intent_falls_back_to_global() {
        let p = estimate_thresholds(&[rec("a", 1.0), rec("b", 5.0)], ThresholdKind::PerIntent).unwrap();
        assert_eq!(p.threshold("a"), 1.0);
        assert_eq!(p.threshold("b"), 5.0);
        assert_eq!(p.threshold("unseen"), 3.0);
    }

    #[test]
    fn equality_is_dropped_by_high_filter() {
        let policy = ThresholdPolicy::global(2.0);
        let records = vec![rec("a", 2.0)];
        assert!(filter(&records, &policy, FilterMode::HighPvi).is_empty());
        assert_eq!(filter(&records, &policy, FilterMode::LowPvi).len(), 1);
    }

    #[test]
    fn refund_examples_above_threshold() {
        let records: Vec<_> = [6.10, 5.81, 3.97, -3.86]
            .iter()
            .map(|&p| rec("refund_not_showing_up", p))
            .collect();
        let mut policy = ThresholdPolicy::global(0.0);
        policy.kind = ThresholdKind::PerIntent;
        policy.per_intent.insert("refund_not_showing_up".into(), 5.79);
        let kept = filter(&records, &policy, FilterMode::HighPvi);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].pvi, Some(6.10));
        assert_eq!(kept[1].pvi, Some(5.81));
    }

    #[test]
    fn uniform_null_model_offsets_by_log_labels() {
        let vocab = LabelVocabulary::from_labels(["a", "b", "c", "d", "e"]);
        let cfg = FeatureConfig::default();
        let x = cfg.featurize("hello world");
        let g_prime = TaskModel::from_parts(
            vocab.clone(),
            cfg,
            x.indices().to_vec(),
            (0..5).map(|l| vec![l as f64 * 0.3; x.indices().len()]).collect(),
            vec![0.1, 0.0, -0.2, 0.4, 0.0],
        )
        .unwrap();
        let g_star = TaskModel::zeros(vocab, cfg);
        let r = compute_pvi(&g_prime, &g_star, &LabeledExample::synthetic("hello world", "c")).unwrap();
        let expected = g_prime.log2_proba_text("hello world")[2] + 5f64.log2();
        assert!((r.pvi - expected).abs() < 1e-12);
        assert!(r.log2_conditional <= 0.0 && r.log2_null <= 0.0);
        assert_eq!(r.example.pvi, Some(r.pvi));
    }

    #[test]
    fn errors_on_unknown_label_and_mismatch() {
        let cfg = FeatureConfig::default();
        let a = TaskModel::zeros(LabelVocabulary::from_labels(["a", "b"]), cfg);
        let b = TaskModel::zeros(LabelVocabulary::from_labels(["b", "a"]), cfg);
        assert!(matches!(
            compute_pvi(&a, &a, &LabeledExample::synthetic("t", "q")),
            Err(PviError::UnknownLabel(_))
        ));
        assert!(matches!(
            compute_pvi(&a, &b, &LabeledExample::synthetic("t", "a")),
            Err(PviError::VocabularyMismatch)
        ));
    }

    #[test]
    fn records_roundtrip_through_jsonl() {
        let records = vec![rec("a", 1.25), rec("b", -0.5)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pvi.jsonl");
        write_records(&path, &records).unwrap();
        let back = read_records(&path, Provenance::Synthetic).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.pvi, b.pvi);
            assert_eq!(a.log2_conditional, b.log2_conditional);
            assert_eq!(a.example.text, b.example.text);
        }
        let line = std::fs::read_to_string(&path).unwrap();
        assert!(line.starts_with(r#"{"text":"#) && line.contains(r#""log2_null":"#));
    }

    #[test]
    fn summaries() {
        let s = summarize_by_intent(&[rec("a", 1.0), rec("a", 3.0), rec("b", -1.0)]);
        assert_eq!(s["a"].count, 2);
        assert_eq!(s["a"].mean, 2.0);
        assert_eq!(s["a"].min, 1.0);
        assert_eq!(s["b"].max, -1.0);
    }
}
