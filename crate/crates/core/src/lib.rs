//! Prompted generation of training utterances for intent classifiers, with PVI-based filtering.
//!
//! Candidate utterances are generated per intent, scored with pointwise
//! V-information against a null-input model, filtered by per-intent or
//! global thresholds, and used to train a downstream intent classifier.

pub mod classifier;
pub mod corpus;
pub mod generator;
pub mod metrics;
pub mod pipeline;
pub mod pvi;
pub mod seed;
pub mod selectors;
pub mod text;
