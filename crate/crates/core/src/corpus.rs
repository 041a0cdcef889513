//! Dataset ingestion, label vocabulary and few-shot subsampling.
//!
//! A corpus directory holds `train.jsonl`, `validation.jsonl` and
//! `test.jsonl`, one `{"text": ..., "label": ...}` object per line.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{split} line {line}: malformed JSON: {message}")]
    Json {
        split: Split,
        line: usize,
        message: String,
    },
    #[error("{split} line {line}: missing string field \"{field}\"")]
    MissingField {
        split: Split,
        line: usize,
        field: &'static str,
    },
    #[error("{split} line {line}: text is empty after trimming")]
    EmptyText { split: Split, line: usize },
    #[error("cannot build a label vocabulary from zero examples")]
    EmptyVocabulary,
    #[error("{split} split uses label \"{label}\" which has no training examples")]
    UnknownLabel { split: Split, label: String },
    #[error("intent \"{intent}\" has {available} training examples, {requested} requested")]
    InsufficientExamples {
        intent: String,
        available: usize,
        requested: usize,
    },
    #[error("few-shot size must be positive")]
    ZeroShots,
    #[error("({text:?}, {label}) appears in both {first} and {second}")]
    SplitOverlap {
        text: String,
        label: String,
        first: Split,
        second: Split,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.jsonl",
            Split::Validation => "validation.jsonl",
            Split::Test => "test.jsonl",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Synthetic,
}

/// One utterance with its intent label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvi: Option<f64>,
}

impl LabeledExample {
    pub fn seed(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: normalize_label(&label.into()),
            provenance: Provenance::Seed,
            pvi: None,
        }
    }

    pub fn synthetic(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            provenance: Provenance::Synthetic,
            ..Self::seed(text, label)
        }
    }

    /// The `(text, label)` identity used for duplicate and overlap checks.
    pub fn key(&self) -> (&str, &str) {
        (&self.text, &self.label)
    }
}

/// Labels are compared as NFC-normalized exact strings.
pub fn normalize_label(label: &str) -> String {
    label.nfc().collect()
}

/// Ordered, duplicate-free set of intent labels with a label ↔ id bijection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocabulary {
    /// Builds a vocabulary from labels in the given order, dropping repeats.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Self {
            labels: Vec::new(),
            index: HashMap::new(),
        };
        for label in labels {
            let label = normalize_label(label.as_ref());
            if !out.index.contains_key(&label) {
                out.index.insert(label.clone(), out.labels.len());
                out.labels.push(label);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }
}

impl From<Vec<String>> for LabelVocabulary {
    fn from(labels: Vec<String>) -> Self {
        Self::from_labels(labels)
    }
}

impl From<LabelVocabulary> for Vec<String> {
    fn from(vocab: LabelVocabulary) -> Self {
        vocab.labels
    }
}

/// Sorted vocabulary over every distinct label in `examples`.
pub fn build_vocabulary(examples: &[LabeledExample]) -> Result<LabelVocabulary, CorpusError> {
    if examples.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let mut labels: Vec<String> = examples.iter().map(|e| normalize_label(&e.label)).collect();
    labels.sort();
    labels.dedup();
    Ok(LabelVocabulary::from_labels(labels))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub vocabulary: LabelVocabulary,
}

impl Dataset {
    /// Assembles a dataset whose vocabulary is built from the training split.
    /// Validation and test labels must be known to it, and no `(text, label)`
    /// pair may appear in two splits.
    pub fn new(
        train: Vec<LabeledExample>,
        validation: Vec<LabeledExample>,
        test: Vec<LabeledExample>,
    ) -> Result<Self, CorpusError> {
        let vocabulary = build_vocabulary(&train)?;
        let mut owner: HashMap<(&str, &str), Split> = HashMap::new();
        for (split, examples) in [
            (Split::Train, &train),
            (Split::Validation, &validation),
            (Split::Test, &test),
        ] {
            for e in examples.iter() {
                if !vocabulary.contains(&e.label) {
                    return Err(CorpusError::UnknownLabel {
                        split,
                        label: e.label.clone(),
                    });
                }
                match owner.get(&e.key()) {
                    Some(&first) if first != split => {
                        return Err(CorpusError::SplitOverlap {
                            text: e.text.clone(),
                            label: e.label.clone(),
                            first,
                            second: split,
                        })
                    }
                    Some(_) => {}
                    None => {
                        owner.insert(e.key(), split);
                    }
                }
            }
        }
        Ok(Self {
            train,
            validation,
            test,
            vocabulary,
        })
    }

    pub fn split(&self, split: Split) -> &[LabeledExample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Training examples grouped by intent, in vocabulary order.
    pub fn train_by_intent(&self) -> BTreeMap<usize, Vec<&LabeledExample>> {
        group_by_intent(&self.train, &self.vocabulary)
    }
}

pub(crate) fn group_by_intent<'a>(
    examples: &'a [LabeledExample],
    vocabulary: &LabelVocabulary,
) -> BTreeMap<usize, Vec<&'a LabeledExample>> {
    let mut groups: BTreeMap<usize, Vec<&LabeledExample>> = BTreeMap::new();
    for e in examples {
        if let Some(id) = vocabulary.id(&e.label) {
            groups.entry(id).or_default().push(e);
        }
    }
    groups
}

#[derive(Deserialize)]
struct RawRow {
    text: Option<serde_json::Value>,
    label: Option<serde_json::Value>,
}

/// Parses JSONL text. Each line must be an object with string `text` and
/// `label` fields; blank lines are skipped.
pub fn parse_jsonl(
    reader: impl BufRead,
    split: Split,
    provenance: Provenance,
) -> Result<Vec<LabeledExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Json {
            split,
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RawRow = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            split,
            line: line_no,
            message: e.to_string(),
        })?;
        let text = match row.text {
            Some(serde_json::Value::String(s)) => s,
            _ => {
                return Err(CorpusError::MissingField {
                    split,
                    line: line_no,
                    field: "text",
                })
            }
        };
        let label = match row.label {
            Some(serde_json::Value::String(s)) => s,
            _ => {
                return Err(CorpusError::MissingField {
                    split,
                    line: line_no,
                    field: "label",
                })
            }
        };
        let text = text.trim();
        if text.is_empty() {
            return Err(CorpusError::EmptyText {
                split,
                line: line_no,
            });
        }
        let mut example = LabeledExample::seed(text, label);
        example.provenance = provenance;
        out.push(example);
    }
    Ok(out)
}

/// Loads one split file; examples come back in file order as seed data.
pub fn load_jsonl(path: impl AsRef<Path>, split: Split) -> Result<Vec<LabeledExample>, CorpusError> {
    load_jsonl_as(path, split, Provenance::Seed)
}

pub fn load_jsonl_as(
    path: impl AsRef<Path>,
    split: Split,
    provenance: Provenance,
) -> Result<Vec<LabeledExample>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(BufReader::new(file), split, provenance)
}

/// Writes `{"text", "label"}` rows.
pub fn write_jsonl(path: impl AsRef<Path>, examples: &[LabeledExample]) -> Result<(), CorpusError> {
    #[derive(Serialize)]
    struct Row<'a> {
        text: &'a str,
        label: &'a str,
    }
    let rows: Vec<Row> = examples
        .iter()
        .map(|e| Row {
            text: &e.text,
            label: &e.label,
        })
        .collect();
    write_rows(path, &rows)
}

pub(crate) fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for row in rows {
        let line = serde_json::to_string(row).expect("rows serialize");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Loads `train.jsonl`, `validation.jsonl` and `test.jsonl` from `dir`.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let dir = dir.as_ref();
    let train = load_jsonl(dir.join(Split::Train.file_name()), Split::Train)?;
    let validation = load_jsonl(dir.join(Split::Validation.file_name()), Split::Validation)?;
    let test = load_jsonl(dir.join(Split::Test.file_name()), Split::Test)?;
    Dataset::new(train, validation, test)
}

const TOY_TRAIN: &str = include_str!("../data/toy/train.jsonl");
const TOY_VALIDATION: &str = include_str!("../data/toy/validation.jsonl");
const TOY_TEST: &str = include_str!("../data/toy/test.jsonl");
const TOY_GENERATOR: &str = include_str!("../data/toy/generator.jsonl");

/// The bundled 12-intent toy corpus (24 train / 6 validation / 10 test
/// utterances per intent). Three intent pairs share most of their slot
/// vocabulary.
pub fn toy_dataset() -> Dataset {
    let parse = |s: &str, split| parse_jsonl(s.as_bytes(), split, Provenance::Seed).expect("bundled corpus parses");
    Dataset::new(
        parse(TOY_TRAIN, Split::Train),
        parse(TOY_VALIDATION, Split::Validation),
        parse(TOY_TEST, Split::Test),
    )
    .expect("bundled corpus is consistent")
}

/// Extra toy utterances (60 per intent) disjoint from every toy split. The
/// offline mock generator draws on them as its background knowledge.
pub fn toy_generator_pool() -> Vec<LabeledExample> {
    parse_jsonl(TOY_GENERATOR.as_bytes(), Split::Train, Provenance::Seed).expect("bundled pool parses")
}

/// Keeps exactly `k` training examples per intent, sampled without
/// replacement. Each intent draws from its own sub-seed so the sample of one
/// intent does not depend on which other intents exist.
pub fn few_shot_sample(dataset: &Dataset, k: usize, seed: u64) -> Result<Dataset, CorpusError> {
    if k == 0 {
        return Err(CorpusError::ZeroShots);
    }
    let groups = dataset.train_by_intent();
    let mut train = Vec::with_capacity(k * groups.len());
    for (id, members) in groups {
        let intent = dataset.vocabulary.label(id);
        if members.len() < k {
            return Err(CorpusError::InsufficientExamples {
                intent: intent.to_string(),
                available: members.len(),
                requested: k,
            });
        }
        let mut rng = seed::rng(seed, &format!("few_shot/{intent}"));
        let mut positions: Vec<usize> = (0..members.len()).collect();
        positions.shuffle(&mut rng);
        let mut chosen: Vec<usize> = positions.into_iter().take(k).collect();
        chosen.sort_unstable();
        train.extend(chosen.into_iter().map(|i| members[i].clone()));
    }
    Ok(Dataset {
        train,
        validation: dataset.validation.clone(),
        test: dataset.test.clone(),
        vocabulary: dataset.vocabulary.clone(),
    })
}

/// Removes repeated `(text, label)` pairs, keeping first occurrences.
/// Returns the number removed.
pub fn dedup_examples(examples: &mut Vec<LabeledExample>) -> usize {
    let before = examples.len();
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(before);
    examples.retain(|e| seen.insert((e.text.clone(), e.label.clone())));
    before - examples.len()
}
