use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::hash::Hasher;

use crate::text::tokenize;

/// Feature hashing setup. Word n-grams of orders `1..=max_order` are hashed
/// into `[0, dimension - 1)`; the last id is reserved for the null input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub dimension: u32,
    pub max_order: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            dimension: 1 << 18,
            max_order: 2,
        }
    }
}

impl FeatureConfig {
    pub fn null_id(&self) -> u32 {
        self.dimension - 1
    }

    fn bucket(&self, order: usize, tokens: &[String]) -> u32 {
        let mut h = fnv::FnvHasher::default();
        h.write_u8(order as u8);
        for t in tokens {
            h.write(t.as_bytes());
            h.write_u8(0x1f);
        }
        (h.finish() % u64::from(self.dimension - 1)) as u32
    }

    /// Bag of hashed word n-grams with counts.
    pub fn featurize(&self, text: &str) -> FeatureVector {
        let tokens = tokenize(text);
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for order in 1..=self.max_order {
            for gram in tokens.windows(order) {
                *counts.entry(self.bucket(order, gram)).or_insert(0.0) += 1.0;
            }
        }
        FeatureVector {
            indices: counts.keys().copied().collect(),
            values: counts.values().copied().collect(),
        }
    }

    /// The input standing for "no utterance": the reserved id with count 1.
    pub fn featurize_null(&self) -> FeatureVector {
        FeatureVector {
            indices: vec![self.null_id()],
            values: vec![1.0],
        }
    }
}

/// Sparse feature counts with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Cosine similarity; zero when either vector is empty.
    pub fn cosine(&self, other: &FeatureVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FeatureConfig {
        FeatureConfig::default()
    }

    #[test]
    fn empty_text_is_empty_vector() {
        assert!(cfg().featurize("").is_empty());
    }

    #[test]
    fn repeated_word() {
        let v = cfg().featurize("Hi Hi");
        assert_eq!(v.indices().len(), 2);
        let uni = cfg().bucket(1, &["hi".to_string()]);
        let bi = cfg().bucket(2, &["hi".to_string(), "hi".to_string()]);
        let map: BTreeMap<u32, f64> = v.iter().collect();
        assert_eq!(map[&uni], 2.0);
        assert_eq!(map[&bi], 1.0);
    }

    #[test]
    fn word_order_changes_only_bigrams() {
        let c = cfg();
        let ab = c.featurize("alarm query");
        let ba = c.featurize("query alarm");
        let unigrams = |v: &FeatureVector| {
            let u: Vec<u32> = ["alarm", "query"].iter().map(|w| c.bucket(1, &[w.to_string()])).collect();
            v.iter().filter(|(i, _)| u.contains(i)).collect::<Vec<_>>()
        };
        assert_eq!(unigrams(&ab), unigrams(&ba));
        let bigram_ab = c.bucket(2, &["alarm".into(), "query".into()]);
        let bigram_ba = c.bucket(2, &["query".into(), "alarm".into()]);
        assert!(ab.indices().contains(&bigram_ab) && !ab.indices().contains(&bigram_ba));
        assert!(ba.indices().contains(&bigram_ba) && !ba.indices().contains(&bigram_ab));
        assert_ne!(ab, ba);
    }

    #[test]
    fn null_vector_is_reserved() {
        let c = cfg();
        let null = c.featurize_null();
        assert_eq!(null.indices(), [c.null_id()]);
        assert_eq!(null.values(), [1.0]);
        assert_ne!(null, c.featurize(""));
        assert_eq!(null, c.featurize_null());
    }

    #[test]
    fn hashed_ids_never_hit_null_id() {
        let c = FeatureConfig {
            dimension: 8,
            max_order: 2,
        };
        for i in 0..500 {
            let v = c.featurize(&format!("w{i} x{} y{}", i * 7, i % 13));
            assert!(v.indices().iter().all(|&id| id < c.null_id()));
            assert!(v.indices().windows(2).all(|w| w[0] < w[1]));
            assert!(v.values().iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn cosine_basics() {
        let c = cfg();
        let a = c.featurize("play some jazz");
        assert!((a.cosine(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a.cosine(&FeatureVector::default()), 0.0);
        assert_eq!(a.cosine(&c.featurize("translate hello")), 0.0);
    }
}
