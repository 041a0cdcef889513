//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use icda::classifier::objective::{Gradient, Parameters, SparseExample};
use icda::classifier::{train, IntentModel, TrainConfig};
use icda::corpus::{toy_dataset, LabelVocabulary, LabeledExample};
use icda::metrics::BLEU_EPSILON;

/// A small random problem: labels, features, sparse inputs and parameters.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Parameters, Vec<SparseExample>) {
    let n_labels = rng.gen_range(2..6);
    let n_features = rng.gen_range(1..8);
    let mut params = Parameters::zeros(n_labels, n_features);
    for w in params.weights.iter_mut().chain(params.bias.iter_mut()) {
        *w = rng.gen_range(-2.0..2.0);
    }
    let examples = (0..rng.gen_range(1..6))
        .map(|_| {
            let mut cols: Vec<usize> = (0..n_features).filter(|_| rng.gen_bool(0.6)).collect();
            if cols.is_empty() {
                cols.push(0);
            }
            let values = cols.iter().map(|_| rng.gen_range(0.5..3.0)).collect();
            SparseExample {
                cols,
                values,
                label: rng.gen_range(0..n_labels),
            }
        })
        .collect();
    (params, examples)
}

/// Relative error `|a - n| / max(|a|, |n|)` between the analytic and
/// central-difference gradient vectors.
pub fn gradient_error(params: &Parameters, examples: &[SparseExample]) -> f64 {
    let h = 1e-5;
    let batch: Vec<&SparseExample> = examples.iter().collect();
    let mut grad = Gradient::default();
    params.loss_and_gradient(&batch, &mut grad);
    let numeric = |get: &dyn Fn(&mut Parameters) -> &mut f64| {
        let mut p = params.clone();
        *get(&mut p) += h;
        let up = p.loss(examples);
        *get(&mut p) -= 2.0 * h;
        let down = p.loss(examples);
        (up - down) / (2.0 * h)
    };
    let mut analytic = grad.weights.clone();
    analytic.extend_from_slice(&grad.bias);
    let mut numerical: Vec<f64> = (0..params.weights.len()).map(|i| numeric(&|p| &mut p.weights[i])).collect();
    numerical.extend((0..params.bias.len()).map(|i| numeric(&|p| &mut p.bias[i])));
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(&numerical).map(|(a, n)| a - n));
    diff / norm(&mut analytic.iter().copied()).max(norm(&mut numerical.iter().copied())).max(1e-12)
}

/// KL(empirical marginal || model distribution on the null input), bits.
pub fn null_model_kl(examples: &[LabeledExample], vocab: &LabelVocabulary, config: &TrainConfig) -> f64 {
    let model = train(examples, vocab, config, true).unwrap().model;
    let q = model.log2_proba_null();
    let mut counts = vec![0usize; vocab.len()];
    for e in examples {
        counts[vocab.id(&e.label).unwrap()] += 1;
    }
    counts
        .iter()
        .zip(&q)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &lq)| {
            let p = c as f64 / examples.len() as f64;
            p * (p.log2() - lq)
        })
        .sum()
}

/// Toy training split thinned so intent `i` keeps `2 + 2i` examples.
pub fn skewed_toy() -> (Vec<LabeledExample>, LabelVocabulary) {
    let ds = toy_dataset();
    let mut out = Vec::new();
    for (i, label) in ds.vocabulary.labels().iter().enumerate() {
        out.extend(ds.train.iter().filter(|e| &e.label == label).take(2 + 2 * i).cloned());
    }
    (out, ds.vocabulary.clone())
}

pub fn words(t: &str) -> Vec<&str> {
    t.split(' ').filter(|w| !w.is_empty()).collect()
}

/// Distinct-n by listing every n-gram; `None` when there are none.
pub fn naive_distinct(corpus: &[String], n: usize) -> Option<f64> {
    let mut all: Vec<Vec<&str>> = Vec::new();
    for t in corpus {
        let w = words(t);
        if w.len() >= n {
            for i in 0..=w.len() - n {
                all.push(w[i..i + n].to_vec());
            }
        }
    }
    if all.is_empty() {
        return None;
    }
    let mut unique = 0;
    for (i, g) in all.iter().enumerate() {
        if !all[..i].contains(g) {
            unique += 1;
        }
    }
    Some(unique as f64 / all.len() as f64)
}

fn grams<'a>(w: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut m = HashMap::new();
    if w.len() >= n {
        for i in 0..=w.len() - n {
            *m.entry(w[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Self-BLEU recomputing every reference's n-gram counts from scratch.
pub fn naive_self_bleu(corpus: &[String], max_n: usize) -> f64 {
    let docs: Vec<Vec<&str>> = corpus.iter().map(|t| words(t)).collect();
    let mut total = 0.0;
    for (i, hyp) in docs.iter().enumerate() {
        let refs: Vec<&Vec<&str>> = docs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, d)| d).collect();
        if hyp.is_empty() {
            continue;
        }
        let mut log_p = 0.0;
        let orders = (1..=max_n).filter(|&n| hyp.len() >= n).count();
        for n in 1..=orders {
            let h = grams(hyp, n);
            let t: usize = h.values().sum();
            let m: usize = h
                .iter()
                .map(|(g, &c)| c.min(refs.iter().map(|r| grams(r, n).get(g).copied().unwrap_or(0)).max().unwrap()))
                .sum();
            let p = if m == 0 { BLEU_EPSILON / t as f64 } else { m as f64 / t as f64 };
            log_p += p.ln() / orders as f64;
        }
        let r = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - hyp.len() as i64).abs(), l))
            .unwrap();
        let bp = if hyp.len() > r { 1.0 } else { (1.0 - r as f64 / hyp.len() as f64).exp() };
        total += bp * log_p.exp();
    }
    total / docs.len() as f64
}
