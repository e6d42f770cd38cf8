//! Scoring of induced scripts and individual tasks: LCS/ROUGE-L,
//! set precision/recall/F1 for inclusive selection, start accuracy,
//! and the combined report layouts.
//!
//! Text comparison is exact after trimming and lowercasing — no
//! paraphrase matching.

mod report;

pub use report::{
    reference_report, run_report, MethodMetrics, ReportRow, TaskReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Script, SubEvent};
use crate::induction::{build_relation_matrix, order_events};
use crate::tasks::{Prober, TaskError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference sequence is empty")]
    EmptyReference,
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// Length of the longest common subsequence of `a` and `b` under `eq`.
/// Two-row dynamic program, O(|a|*|b|).
pub fn lcs_length<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if eq(x, y) {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L triple; values in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(lcs: usize, candidate_len: usize, reference_len: usize) -> Self {
        let recall = lcs as f64 / reference_len as f64;
        let precision = if candidate_len == 0 {
            0.0
        } else {
            lcs as f64 / candidate_len as f64
        };
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore { recall, precision, f1 }
    }
}

/// What unit ROUGE-L compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Whole sub-event strings (trimmed, lowercased).
    Event,
    /// Lowercased whitespace tokens of the concatenated events.
    Token,
}

fn normalize(text: &str) -> String {
    text.trim().to_lowercase()
}

fn token_units(events: &[SubEvent]) -> Vec<String> {
    events
        .iter()
        .flat_map(|e| {
            e.text()
                .to_lowercase()
                .split_whitespace()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// ROUGE-L of a candidate event sequence against a non-empty reference.
pub fn rouge_l(
    candidate: &[SubEvent],
    reference: &[SubEvent],
    granularity: Granularity,
) -> Result<RougeScore, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let (lcs, c_len, r_len) = match granularity {
        Granularity::Event => {
            let c: Vec<String> = candidate.iter().map(|e| normalize(e.text())).collect();
            let r: Vec<String> = reference.iter().map(|e| normalize(e.text())).collect();
            (lcs_length(&c, &r, |a, b| a == b), c.len(), r.len())
        }
        Granularity::Token => {
            let c = token_units(candidate);
            let r = token_units(reference);
            (lcs_length(&c, &r, |a, b| a == b), c.len(), r.len())
        }
    };
    Ok(RougeScore::from_counts(lcs, c_len, r_len))
}

/// Set-overlap (recall, precision, f1) of predicted vs gold sub-events
/// by exact (trimmed, lowercased) string match. Gold must be non-empty.
pub fn eval_inclusive(predicted: &[SubEvent], gold: &[SubEvent]) -> (f64, f64, f64) {
    assert!(!gold.is_empty(), "gold set must be non-empty");
    let gold_set: std::collections::HashSet<String> =
        gold.iter().map(|e| normalize(e.text())).collect();
    let pred_set: std::collections::HashSet<String> =
        predicted.iter().map(|e| normalize(e.text())).collect();
    let overlap = pred_set.intersection(&gold_set).count() as f64;
    let recall = overlap / gold_set.len() as f64;
    let precision = if pred_set.is_empty() {
        0.0
    } else {
        overlap / pred_set.len() as f64
    };
    let f1 = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (recall, precision, f1)
}

/// 1 iff the predicted start equals the gold script's first event.
pub fn eval_start(predicted: &SubEvent, gold_script: &Script) -> bool {
    normalize(predicted.text()) == normalize(gold_script.first().text())
}

/// Ordering quality in isolation: run start selection and pairwise
/// ordering over exactly the gold event set, then event-level ROUGE-L
/// against the gold order. The gold script must have >= 2 events.
pub fn eval_ordering(
    prober: &Prober,
    main_event: &str,
    gold_script: &Script,
) -> Result<RougeScore, EvalError> {
    assert!(gold_script.len() >= 2, "ordering needs at least two events");
    let events = gold_script.events();
    let start = prober.select_start(main_event, events)?;
    let matrix = build_relation_matrix(prober, events)?;
    let ordered = order_events(&matrix, Some(&start));
    rouge_l(&ordered, events, Granularity::Event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Scenario, ScriptCorpus};
    use crate::prompting::PromptSet;
    use crate::scorer::MockBackend;
    use std::sync::Arc;

    fn subs(texts: &[&str]) -> Vec<SubEvent> {
        texts.iter().map(|t| SubEvent::new(*t).unwrap()).collect()
    }

    /// Brute-force LCS oracle: enumerate every subsequence of the
    /// shorter side and check containment in the longer side.
    fn lcs_oracle(a: &[u8], b: &[u8]) -> usize {
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let mut best = 0;
        for mask in 0u32..(1 << short.len()) {
            let sub: Vec<u8> = short
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| *v)
                .collect();
            if sub.len() <= best {
                continue;
            }
            let mut it = long.iter();
            if sub.iter().all(|s| it.any(|l| l == s)) {
                best = sub.len();
            }
        }
        best
    }

    #[test]
    fn lcs_identity_and_boundary() {
        let a = subs(&["a", "b", "c", "d", "e"]);
        assert_eq!(lcs_length(&a, &a, |x, y| x == y), 5);
        let empty: Vec<SubEvent> = vec![];
        assert_eq!(lcs_length(&empty, &a, |x, y| x == y), 0);
    }

    #[test]
    fn lcs_matches_hand_example() {
        // brute-force over all subsequences confirms max common length 3
        let a = subs(&["a", "b", "c", "d"]);
        let b = subs(&["a", "c", "b", "d"]);
        assert_eq!(lcs_length(&a, &b, |x, y| x == y), 3);
        assert_eq!(lcs_oracle(b"abcd", b"acbd"), 3);
    }

    #[test]
    fn lcs_agrees_with_brute_force_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let len_a = rng.gen_range(0..=8);
            let len_b = rng.gen_range(0..=8);
            let a: Vec<u8> = (0..len_a).map(|_| rng.gen_range(b'a'..=b'd')).collect();
            let b: Vec<u8> = (0..len_b).map(|_| rng.gen_range(b'a'..=b'd')).collect();
            assert_eq!(
                lcs_length(&a, &b, |x, y| x == y),
                lcs_oracle(&a, &b),
                "mismatch on {a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn rouge_identity_is_perfect() {
        let a = subs(&["x", "y", "z"]);
        let r = rouge_l(&a, &a, Granularity::Event).unwrap();
        assert_eq!((r.recall, r.precision, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rouge_event_level_hand_example() {
        let candidate = subs(&["a", "c", "b", "d"]);
        let reference = subs(&["a", "b", "c", "d"]);
        let r = rouge_l(&candidate, &reference, Granularity::Event).unwrap();
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.precision - 0.75).abs() < 1e-12);
        assert!((r.f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rouge_empty_candidate_is_zero() {
        let reference = subs(&["a", "b", "c", "d"]);
        let r = rouge_l(&[], &reference, Granularity::Event).unwrap();
        assert_eq!((r.recall, r.precision, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_empty_reference_is_an_error() {
        assert!(matches!(
            rouge_l(&subs(&["a"]), &[], Granularity::Event),
            Err(EvalError::EmptyReference)
        ));
    }

    #[test]
    fn rouge_token_level_splits_events() {
        let candidate = subs(&["wash the cup"]);
        let reference = subs(&["wash the cup", "dry it"]);
        let r = rouge_l(&candidate, &reference, Granularity::Token).unwrap();
        assert!((r.recall - 3.0 / 5.0).abs() < 1e-12);
        assert!((r.precision - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eval_inclusive_identity_and_empty() {
        let gold = subs(&["a", "b", "c", "d", "e"]);
        assert_eq!(eval_inclusive(&gold, &gold), (1.0, 1.0, 1.0));
        assert_eq!(eval_inclusive(&[], &gold), (0.0, 0.0, 0.0));
    }

    #[test]
    fn eval_inclusive_hand_example() {
        let gold = subs(&["a", "b", "c", "d"]);
        let predicted = subs(&["a", "b", "x"]);
        let (r, p, f) = eval_inclusive(&predicted, &gold);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert!((f - 0.5714285714285715).abs() < 1e-9);
    }

    /// Confusion-matrix oracle for the set metrics.
    fn set_f1_oracle(predicted: &[SubEvent], gold: &[SubEvent]) -> (f64, f64, f64) {
        let p: std::collections::HashSet<&str> = predicted.iter().map(|e| e.text()).collect();
        let g: std::collections::HashSet<&str> = gold.iter().map(|e| e.text()).collect();
        let tp = p.intersection(&g).count() as f64;
        let fp = p.difference(&g).count() as f64;
        let fn_ = g.difference(&p).count() as f64;
        let recall = tp / (tp + fn_);
        let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (recall, precision, f1)
    }

    #[test]
    fn eval_inclusive_matches_confusion_matrix_oracle() {
        let fixtures: Vec<(Vec<&str>, Vec<&str>)> = vec![
            (vec!["a", "b", "x"], vec!["a", "b", "c", "d"]),
            (vec![], vec!["a"]),
            (vec!["q", "r"], vec!["a", "b"]),
            (vec!["a", "b", "c"], vec!["a", "b", "c"]),
            (vec!["a", "a", "b"], vec!["a", "b", "c"]), // dup collapses
        ];
        for (pred, gold) in fixtures {
            let pred = subs(&pred);
            let gold = subs(&gold);
            let ours = eval_inclusive(&pred, &gold);
            let oracle = set_f1_oracle(&pred, &gold);
            assert!((ours.0 - oracle.0).abs() < 1e-12);
            assert!((ours.1 - oracle.1).abs() < 1e-12);
            assert!((ours.2 - oracle.2).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_start_is_exact_first_event_match() {
        let script = Script::new(subs(&["first", "second"])).unwrap();
        assert!(eval_start(&SubEvent::new("first").unwrap(), &script));
        assert!(!eval_start(&SubEvent::new("second").unwrap(), &script));
    }

    fn corpus_of(main: &str, events: &[&str]) -> ScriptCorpus {
        ScriptCorpus::new(vec![Scenario::new(
            "s1",
            main,
            vec![Script::new(subs(events)).unwrap()],
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn consistent_mock_orders_perfectly() {
        let corpus = corpus_of("m", &["a", "b", "c", "d"]);
        let prober = Prober::new(
            Arc::new(MockBackend::consistent_with(&corpus, 1)),
            PromptSet::default(),
        );
        let r = eval_ordering(&prober, "m", &corpus.scenarios()[0].scripts[0]).unwrap();
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn reversed_mock_scores_one_over_n() {
        // reversed start + reversed margins produce [d,c,b,a];
        // LCS([d,c,b,a],[a,b,c,d]) = 1 so F1 = 0.25 on 4 events
        let corpus = corpus_of("m", &["a", "b", "c", "d"]);
        let prober = Prober::new(
            Arc::new(MockBackend::consistent_reversed(&corpus, 1)),
            PromptSet::default(),
        );
        let r = eval_ordering(&prober, "m", &corpus.scenarios()[0].scripts[0]).unwrap();
        assert!((r.f1 - 0.25).abs() < 1e-12);
        assert!((r.recall - 0.25).abs() < 1e-12);
    }

    #[test]
    fn random_mocks_stay_in_range() {
        let corpus = corpus_of("m", &["a", "b", "c", "d", "e"]);
        let script = &corpus.scenarios()[0].scripts[0];
        for seed in 0..100 {
            let prober = Prober::new(Arc::new(MockBackend::new(seed)), PromptSet::default());
            let r = eval_ordering(&prober, "m", script).unwrap();
            assert!((0.0..=1.0).contains(&r.f1), "seed {seed}: {r:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn event_seq() -> impl Strategy<Value = Vec<SubEvent>> {
            proptest::collection::vec("[a-e]{1,3}", 0..10).prop_map(|ts| {
                ts.into_iter()
                    .enumerate()
                    .map(|(i, t)| SubEvent::new(format!("{t} {i}")).unwrap())
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn lcs_symmetric_and_bounded(a in event_seq(), b in event_seq()) {
                let eq = |x: &SubEvent, y: &SubEvent| x == y;
                let ab = lcs_length(&a, &b, eq);
                prop_assert_eq!(ab, lcs_length(&b, &a, eq));
                prop_assert!(ab <= a.len().min(b.len()));
                prop_assert_eq!(lcs_length(&a, &a, eq), a.len());
            }

            #[test]
            fn permutation_candidates_have_equal_recall_precision(
                reference in event_seq().prop_filter("non-empty", |v| !v.is_empty()),
                seed in 0u64..1000
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut candidate = reference.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                candidate.shuffle(&mut rng);
                let r = rouge_l(&candidate, &reference, Granularity::Event).unwrap();
                prop_assert!((r.recall - r.precision).abs() < 1e-12);
            }

            #[test]
            fn extending_candidate_along_reference_never_hurts(
                reference in event_seq().prop_filter("len >= 2", |v| v.len() >= 2)
            ) {
                // candidate = first half of the reference, then extend by
                // the next reference element (which extends the LCS)
                let half = reference.len() / 2;
                let shorter = &reference[..half];
                let longer = &reference[..half + 1];
                let a = rouge_l(shorter, &reference, Granularity::Event).unwrap();
                let b = rouge_l(longer, &reference, Granularity::Event).unwrap();
                prop_assert!(b.recall >= a.recall);
                prop_assert!(b.precision >= a.precision);
            }
        }
    }
}
