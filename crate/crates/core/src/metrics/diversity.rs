use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};

use super::MetricsError;
use crate::text::tokenize;

/// Smoothing constant substituted for a zero n-gram precision.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Unique n-grams over total n-grams. N-grams never cross text boundaries;
/// texts shorter than `n` tokens contribute nothing.
pub fn distinct_n<S: AsRef<str>>(corpus: &[S], n: usize) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    if n == 0 {
        return Err(MetricsError::InvalidOrder);
    }
    let mut unique: HashSet<Vec<String>> = HashSet::new();
    let mut total = 0usize;
    for text in corpus {
        let tokens = tokenize(text.as_ref());
        for gram in tokens.windows(n) {
            total += 1;
            unique.insert(gram.to_vec());
        }
    }
    if total == 0 {
        return Err(MetricsError::NoNgrams(n));
    }
    Ok(unique.len() as f64 / total as f64)
}

type Gram = Vec<u32>;

struct Indexed {
    lengths: Vec<usize>,
    /// Per order, per text: n-gram counts.
    counts: Vec<Vec<HashMap<Gram, usize>>>,
    /// Per order, per n-gram: (best count, text holding it, runner-up count).
    best: Vec<HashMap<Gram, (usize, usize, usize)>>,
}

fn index_corpus<S: AsRef<str>>(corpus: &[S], max_n: usize) -> Indexed {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|t| {
            tokenize(t.as_ref())
                .into_iter()
                .map(|tok| {
                    let next = ids.len() as u32;
                    *ids.entry(tok).or_insert(next)
                })
                .collect()
        })
        .collect();
    let mut counts = Vec::with_capacity(max_n);
    let mut best = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let per_doc: Vec<HashMap<Gram, usize>> = docs
            .iter()
            .map(|d| {
                let mut m = HashMap::new();
                for g in d.windows(n) {
                    *m.entry(g.to_vec()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        let mut top: HashMap<Gram, (usize, usize, usize)> = HashMap::new();
        for (doc, m) in per_doc.iter().enumerate() {
            for (g, &c) in m {
                let e = top.entry(g.clone()).or_insert((0, usize::MAX, 0));
                if c > e.0 {
                    *e = (c, doc, e.0);
                } else if c > e.2 {
                    e.2 = c;
                }
            }
        }
        counts.push(per_doc);
        best.push(top);
    }
    Indexed {
        lengths: docs.iter().map(Vec::len).collect(),
        counts,
        best,
    }
}

/// Closest length in `hist` after removing one occurrence of `own`; ties go
/// to the shorter length.
fn closest_other_length(hist: &BTreeMap<usize, usize>, own: usize) -> usize {
    let available = |len: usize| {
        let c = hist.get(&len).copied().unwrap_or(0);
        if len == own {
            c > 1
        } else {
            c > 0
        }
    };
    if available(own) {
        return own;
    }
    let below = hist.range(..own).rev().map(|(&l, _)| l).find(|&l| available(l));
    let above = hist.range(own + 1..).map(|(&l, _)| l).find(|&l| available(l));
    match (below, above) {
        (Some(b), Some(a)) => {
            if own - b <= a - own {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => unreachable!("corpus has at least two texts"),
    }
}

/// Sentence BLEU given clipped matches and totals per order. Orders with no
/// hypothesis n-grams are left out and the weights spread over the rest.
pub(crate) fn bleu_from_counts(matches: &[usize], totals: &[usize], hyp_len: usize, ref_len: usize) -> f64 {
    let orders = totals.iter().filter(|&&t| t > 0).count();
    if hyp_len == 0 || orders == 0 {
        return 0.0;
    }
    let log_precision: f64 = matches
        .iter()
        .zip(totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&m, &t)| {
            let p = if m == 0 { BLEU_EPSILON / t as f64 } else { m as f64 / t as f64 };
            p.ln() / orders as f64
        })
        .sum();
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    bp * log_precision.exp()
}

/// Mean sentence BLEU of each text against all the others as references.
///
/// Uniform weights over orders `1..=max_n`, clipped n-gram precision, the
/// brevity penalty against the closest reference length (shorter wins
/// ties), and `BLEU_EPSILON` in place of a zero match count. A text shorter
/// than `max_n` tokens is scored on the orders it has; an empty text
/// scores 0.
pub fn self_bleu<S: AsRef<str> + Sync>(corpus: &[S], max_n: usize) -> Result<f64, MetricsError> {
    if corpus.len() < 2 {
        return Err(MetricsError::CorpusTooSmall(corpus.len()));
    }
    if max_n == 0 {
        return Err(MetricsError::InvalidOrder);
    }
    let idx = index_corpus(corpus, max_n);
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &idx.lengths {
        *hist.entry(l).or_insert(0) += 1;
    }
    let mut scores: Vec<f64> = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let mut matches = vec![0; max_n];
            let mut totals = vec![0; max_n];
            for n in 0..max_n {
                for (g, &c) in &idx.counts[n][i] {
                    let (top, holder, second) = idx.best[n][g];
                    let ref_max = if holder == i { second } else { top };
                    matches[n] += c.min(ref_max);
                    totals[n] += c;
                }
            }
            let own = idx.lengths[i];
            bleu_from_counts(&matches, &totals, own, closest_other_length(&hist, own))
        })
        .collect();
    // Summing in sorted order makes the result independent of corpus order.
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
