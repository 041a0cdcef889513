use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::model::TaskModel;
use super::ClassifierError;
use crate::corpus::LabeledExample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub per_intent_f1: BTreeMap<String, f64>,
    /// Mean F1 over intents that have gold examples or predictions.
    pub macro_f1: f64,
    /// Intents with neither gold examples nor predictions; their F1 is
    /// reported as 0 and excluded from the macro average.
    pub undefined_f1: Vec<String>,
}

pub fn evaluate(model: &TaskModel, examples: &[LabeledExample]) -> Result<Evaluation, ClassifierError> {
    let vocab = model.vocabulary();
    let gold = examples
        .iter()
        .map(|e| vocab.id(&e.label).ok_or_else(|| ClassifierError::UnknownLabel(e.label.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let predicted: Vec<usize> = examples.iter().map(|e| model.predict_text(&e.text)).collect();
    score_predictions(vocab.labels(), &gold, &predicted)
}

/// Accuracy and one-vs-rest F1 from label-id sequences.
pub fn score_predictions(labels: &[String], gold: &[usize], predicted: &[usize]) -> Result<Evaluation, ClassifierError> {
    if gold.is_empty() {
        return Err(ClassifierError::EmptyEvaluationSet);
    }
    let n = labels.len();
    let (mut tp, mut gold_count, mut pred_count) = (vec![0usize; n], vec![0usize; n], vec![0usize; n]);
    for (&g, &p) in gold.iter().zip(predicted) {
        gold_count[g] += 1;
        pred_count[p] += 1;
        if g == p {
            tp[g] += 1;
        }
    }
    let correct: usize = tp.iter().sum();
    let mut per_intent_f1 = BTreeMap::new();
    let mut undefined_f1 = Vec::new();
    let mut defined = Vec::new();
    for l in 0..n {
        let denom = gold_count[l] + pred_count[l];
        let f1 = if denom == 0 {
            undefined_f1.push(labels[l].clone());
            0.0
        } else {
            let f1 = 2.0 * tp[l] as f64 / denom as f64;
            defined.push(f1);
            f1
        };
        per_intent_f1.insert(labels[l].clone(), f1);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / gold.len() as f64,
        per_intent_f1,
        macro_f1: defined.iter().sum::<f64>() / defined.len() as f64,
        undefined_f1,
    })
}
