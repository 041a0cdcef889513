use crate::classifier::{argmax, IntentModel};
use crate::corpus::LabeledExample;

#[derive(Debug, Clone, PartialEq)]
pub struct Relabeled {
    pub examples: Vec<LabeledExample>,
    /// Label each example carried before relabeling, same order.
    pub original_labels: Vec<String>,
    pub changed: usize,
}

/// Replaces every label with the oracle's argmax prediction (ties to the
/// lowest label id). Text, provenance and order are kept; PVI is cleared
/// when the label changes.
pub fn relabel<M: IntentModel + Sync>(oracle: &M, examples: &[LabeledExample]) -> Relabeled {
    use rayon::prelude::*;
    let predicted: Vec<usize> = examples.par_iter().map(|e| argmax(&oracle.log2_proba_text(&e.text))).collect();
    let mut out = Vec::with_capacity(examples.len());
    let mut original_labels = Vec::with_capacity(examples.len());
    let mut changed = 0;
    for (e, id) in examples.iter().zip(predicted) {
        let label = oracle.vocabulary().label(id);
        let mut next = e.clone();
        if label != e.label {
            changed += 1;
            next.label = label.to_string();
            next.pvi = None;
        }
        original_labels.push(e.label.clone());
        out.push(next);
    }
    Relabeled {
        examples: out,
        original_labels,
        changed,
    }
}
