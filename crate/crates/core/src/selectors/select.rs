use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CartographyCategory, CartographyLabel, SelectorError, UncertaintyScore};
use crate::seed;

/// Something with an example index, a score where higher means harder or
/// more uncertain, and optionally a cartography category.
pub trait Scored {
    fn index(&self) -> usize;
    fn score(&self) -> f64;
    fn category(&self) -> Option<CartographyCategory> {
        None
    }
}

impl Scored for UncertaintyScore {
    fn index(&self) -> usize {
        self.index
    }
    fn score(&self) -> f64 {
        self.score
    }
}

impl Scored for CartographyLabel {
    fn index(&self) -> usize {
        self.index
    }
    /// Hardness: one minus mean gold confidence.
    fn score(&self) -> f64 {
        1.0 - self.confidence_mean
    }
    fn category(&self) -> Option<CartographyCategory> {
        Some(self.category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionStrategy {
    HighestScore,
    LowestScore,
    /// Members of the category first (hardest first), padded with the
    /// hardest non-members.
    Category { category: CartographyCategory },
    Random { seed: u64 },
}

/// Number of items kept for `fraction` of `n`: `ceil(fraction * n)`.
pub fn selection_size(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    // absorb rounding such as 3.0000000000000004
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Indices (ascending) of the selected items. Equal scores keep input order.
pub fn select_fraction<T: Scored>(
    items: &[T],
    fraction: f64,
    strategy: SelectionStrategy,
) -> Result<Vec<usize>, SelectorError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SelectorError::InvalidFraction(fraction));
    }
    let k = selection_size(items.len(), fraction);
    let mut order: Vec<usize> = (0..items.len()).collect();
    match strategy {
        SelectionStrategy::HighestScore => {
            order.sort_by(|&a, &b| items[b].score().total_cmp(&items[a].score()));
        }
        SelectionStrategy::LowestScore => {
            order.sort_by(|&a, &b| items[a].score().total_cmp(&items[b].score()));
        }
        SelectionStrategy::Category { category } => {
            order.sort_by(|&a, &b| {
                let ma = items[a].category() == Some(category);
                let mb = items[b].category() == Some(category);
                mb.cmp(&ma).then(items[b].score().total_cmp(&items[a].score()))
            });
        }
        SelectionStrategy::Random { seed } => {
            order.shuffle(&mut seed::rng(seed, "select/random"));
        }
    }
    let mut chosen: Vec<usize> = order[..k].iter().map(|&i| items[i].index()).collect();
    chosen.sort_unstable();
    Ok(chosen)
}
