use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::GeneratorError;
use crate::corpus::LabeledExample;

/// Bumped whenever the rendered prompt layout changes.
pub const TEMPLATE_VERSION: &str = "intent-examples-v1";
pub const INTENT_PREFIX: &str = "Intent: ";
pub const EXAMPLE_PREFIX: &str = "Example: ";
pub const COMPLETION_CUE: &str = "Example:";

/// In-context prompt for one intent: the intent name, its seed utterances,
/// and an unfinished example line for the model to complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    /// Label identifier the completions will be assigned.
    pub intent: String,
    /// Display form with underscores rendered as spaces.
    pub intent_name: String,
    pub seed_examples: Vec<String>,
    pub completion_cue: String,
}

impl PromptSpec {
    /// ```text
    /// Intent: <intent name>
    /// Example: <seed 1>
    /// ...
    /// Example: <seed n>
    /// Example:
    /// ```
    /// Lines are joined with `\n`; there is no trailing newline.
    pub fn render(&self) -> String {
        let mut lines = Vec::with_capacity(self.seed_examples.len() + 2);
        lines.push(format!("{INTENT_PREFIX}{}", self.intent_name));
        lines.extend(self.seed_examples.iter().map(|s| format!("{EXAMPLE_PREFIX}{s}")));
        lines.push(self.completion_cue.clone());
        lines.join("\n")
    }
}

pub fn display_name(intent: &str) -> String {
    intent.replace('_', " ")
}

/// Extracts the intent display name from the first line of a rendered prompt.
pub fn parse_intent_name(prompt: &str) -> Option<&str> {
    prompt.lines().next()?.strip_prefix(INTENT_PREFIX)
}

pub fn build_prompt(intent: &str, seeds: &[LabeledExample]) -> Result<PromptSpec, GeneratorError> {
    if seeds.is_empty() {
        return Err(GeneratorError::EmptySeeds(intent.to_string()));
    }
    let mut texts = Vec::with_capacity(seeds.len());
    for s in seeds {
        if s.label != intent {
            return Err(GeneratorError::MixedIntents {
                intent: intent.to_string(),
                found: s.label.clone(),
            });
        }
        if s.text.contains(['\n', '\r']) {
            return Err(GeneratorError::MultilineSeed(s.text.clone()));
        }
        texts.push(s.text.clone());
    }
    Ok(PromptSpec {
        intent: intent.to_string(),
        intent_name: display_name(intent),
        seed_examples: texts,
        completion_cue: COMPLETION_CUE.to_string(),
    })
}

/// Typical-decoding settings forwarded verbatim to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub typical_p: f64,
    pub repetition_penalty: f64,
    pub max_new_tokens: usize,
    pub stop: Vec<String>,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            typical_p: 0.9,
            repetition_penalty: 1.1,
            max_new_tokens: 48,
            stop: vec!["\n".to_string()],
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.typical_p > 0.0 && self.typical_p <= 1.0) {
            return Err(GeneratorError::InvalidDecoding(format!(
                "typical_p must be in (0, 1], got {}",
                self.typical_p
            )));
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return Err(GeneratorError::InvalidDecoding(format!(
                "repetition_penalty must be >= 1, got {}",
                self.repetition_penalty
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(GeneratorError::InvalidDecoding("max_new_tokens must be positive".into()));
        }
        if self.stop.iter().any(String::is_empty) {
            return Err(GeneratorError::InvalidDecoding("stop sequences must be non-empty".into()));
        }
        Ok(())
    }
}

/// Synthetic targets per intent: `multiplier × seed count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplierPlan {
    pub multiplier: usize,
    pub per_intent_targets: BTreeMap<String, usize>,
}

impl MultiplierPlan {
    pub fn new(multiplier: usize, seeds: &[LabeledExample]) -> Result<Self, GeneratorError> {
        if multiplier == 0 {
            return Err(GeneratorError::ZeroMultiplier);
        }
        let mut per_intent_targets: BTreeMap<String, usize> = BTreeMap::new();
        for s in seeds {
            *per_intent_targets.entry(s.label.clone()).or_insert(0) += multiplier;
        }
        Ok(Self {
            multiplier,
            per_intent_targets,
        })
    }

    pub fn total(&self) -> usize {
        self.per_intent_targets.values().sum()
    }
}

/// One prompt per intent in `seeds`, in label order.
pub fn build_prompts(seeds: &[LabeledExample]) -> Result<Vec<PromptSpec>, GeneratorError> {
    let mut groups: BTreeMap<&str, Vec<LabeledExample>> = BTreeMap::new();
    for s in seeds {
        groups.entry(&s.label).or_default().push(s.clone());
    }
    groups.into_iter().map(|(intent, group)| build_prompt(intent, &group)).collect()
}
