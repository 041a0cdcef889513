mod common;

use proptest::prelude::*;

use common::{naive_distinct, naive_self_bleu};
use icda::metrics::{distinct_n, perplexity, self_bleu, NgramLanguageModel};

fn corpus_strategy(min_texts: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..7), min_texts..6)
        .prop_map(|docs| docs.into_iter().map(|d| d.join(" ")).collect())
}

proptest! {
    #[test]
    fn distinct_matches_brute_force(corpus in corpus_strategy(1), n in 1usize..4) {
        match naive_distinct(&corpus, n) {
            Some(expected) => prop_assert!((distinct_n(&corpus, n).unwrap() - expected).abs() < 1e-9),
            None => prop_assert!(distinct_n(&corpus, n).is_err()),
        }
    }

    #[test]
    fn self_bleu_matches_naive(corpus in corpus_strategy(2), max_n in 1usize..5) {
        let fast = self_bleu(&corpus, max_n).unwrap();
        let slow = naive_self_bleu(&corpus, max_n);
        prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
    }

    #[test]
    fn distinct_in_unit_interval(corpus in corpus_strategy(1), n in 1usize..3) {
        if let Ok(v) = distinct_n(&corpus, n) {
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}

#[test]
fn exhaustive_small_corpora_agree() {
    // every corpus of up to three texts over {a, b} with up to two tokens each
    let texts = ["", "a", "b", "a a", "a b", "b a", "b b"];
    for x in texts {
        for y in texts {
            for z in texts {
                for corpus in [vec![x, y], vec![x, y, z]] {
                    let corpus: Vec<String> = corpus.into_iter().map(String::from).collect();
                    for n in 1..=3 {
                        let fast = self_bleu(&corpus, n).unwrap();
                        assert!((fast - naive_self_bleu(&corpus, n)).abs() < 1e-9, "{corpus:?} n={n}");
                        if let Some(d) = naive_distinct(&corpus, n) {
                            assert!((distinct_n(&corpus, n).unwrap() - d).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn identical_corpus_has_self_bleu_one() {
    for n in 1..=4 {
        let corpus = vec!["wake me up at seven tomorrow"; 5];
        assert!((self_bleu(&corpus, n).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn uniform_model_perplexity_equals_vocabulary_size() {
    let tokens = ["set", "alarm", "play", "jazz", "now"];
    for order in 1..=4 {
        let lm = NgramLanguageModel::uniform(order, &tokens).unwrap();
        let v = lm.vocab_size() as f64;
        let ppl = perplexity(&lm, &["set alarm now", "play some jazz", "unknown words only"]).unwrap();
        assert!((ppl - v).abs() < 1e-9, "order {order}: {ppl} vs {v}");
    }
}
