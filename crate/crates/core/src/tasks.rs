//! The three probing tasks on top of a scorer backend: inclusive
//! selection, starting selection, and pairwise temporal ordering.
//!
//! Decision rules are margin-based and deterministic: a strictly
//! positive margin maps to the positive class (Inclusive / Before),
//! ties go to the negative class. Temporal queries are issued once per
//! unordered pair — the lexicographically smaller text fills slot `{a}`
//! and the reverse relation is defined as the negation — so relation
//! matrices are antisymmetric by construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{InclusiveLabel, SubEvent, TemporalLabel};
use crate::prompting::{Bindings, MaskQuery, PromptSet, TaskKind, TemplateError};
use crate::scorer::{ScorerBackend, ScorerError};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("temporal relation of an event with itself is undefined: {0:?}")]
    IdenticalEvents(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Outcome of one inclusive query; `margin` is
/// score(include) - score(except).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusiveDecision {
    pub main_event: String,
    pub sub_event: SubEvent,
    pub margin: f64,
    pub label: InclusiveLabel,
}

/// A scored start candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartScore {
    pub sub_event: SubEvent,
    pub score: f64,
}

/// Outcome of one temporal query; `margin` is
/// score(before) - score(after) with event_a in slot `{a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDecision {
    pub event_a: SubEvent,
    pub event_b: SubEvent,
    pub margin: f64,
    pub relation: TemporalLabel,
}

/// The margin ranking loss:
/// sum over negatives of max(score(neg) + m - score(pos), 0).
///
/// Zero iff every negative sits at least `m` below the positive;
/// weakly decreasing in the positive score.
pub fn margin_loss(positive_score: f64, negative_scores: &[f64], m: f64) -> f64 {
    negative_scores
        .iter()
        .map(|neg| (neg + m - positive_score).max(0.0))
        .sum()
}

/// Runs the probing tasks. Each task may be served by its own backend
/// (mirroring per-task fine-tuned checkpoints) or by one shared
/// backend.
pub struct Prober {
    inclusive_backend: Arc<dyn ScorerBackend>,
    start_backend: Arc<dyn ScorerBackend>,
    temporal_backend: Arc<dyn ScorerBackend>,
    prompts: PromptSet,
    /// Query each unordered pair in both directions and average the
    /// margins instead of canonicalizing (off by default).
    pub both_directions: bool,
}

impl Prober {
    pub fn new(backend: Arc<dyn ScorerBackend>, prompts: PromptSet) -> Self {
        Prober {
            inclusive_backend: backend.clone(),
            start_backend: backend.clone(),
            temporal_backend: backend,
            prompts,
            both_directions: false,
        }
    }

    pub fn per_task(
        inclusive: Arc<dyn ScorerBackend>,
        start: Arc<dyn ScorerBackend>,
        temporal: Arc<dyn ScorerBackend>,
        prompts: PromptSet,
    ) -> Self {
        Prober {
            inclusive_backend: inclusive,
            start_backend: start,
            temporal_backend: temporal,
            prompts,
            both_directions: false,
        }
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    fn masked_margin(
        &self,
        backend: &dyn ScorerBackend,
        query: &MaskQuery,
    ) -> Result<f64, TaskError> {
        let scores = backend.score_mask_candidates(query, &query.candidates)?;
        let margin = scores
            .margin(&query.candidates[0], &query.candidates[1])
            .expect("scores contain the requested candidates");
        Ok(margin)
    }

    /// Decides whether `sub_event` belongs to the script of `main_event`.
    pub fn predict_inclusive(
        &self,
        main_event: &str,
        sub_event: &SubEvent,
    ) -> Result<InclusiveDecision, TaskError> {
        let query = self.prompts.render(
            TaskKind::Inclusive,
            &Bindings::main_sub(main_event, sub_event.text()),
        )?;
        let margin = self.masked_margin(self.inclusive_backend.as_ref(), &query)?;
        Ok(InclusiveDecision {
            main_event: main_event.to_string(),
            sub_event: sub_event.clone(),
            margin,
            label: if margin > 0.0 {
                InclusiveLabel::Inclusive
            } else {
                InclusiveLabel::Exclusive
            },
        })
    }

    /// One decision per pool element, in pool order.
    pub fn inclusive_decisions(
        &self,
        main_event: &str,
        pool: &[SubEvent],
    ) -> Result<Vec<InclusiveDecision>, TaskError> {
        pool.iter()
            .map(|e| self.predict_inclusive(main_event, e))
            .collect()
    }

    /// The subset of `pool` predicted Inclusive, preserving pool order.
    pub fn select_inclusive(
        &self,
        main_event: &str,
        pool: &[SubEvent],
    ) -> Result<Vec<SubEvent>, TaskError> {
        Ok(self
            .inclusive_decisions(main_event, pool)?
            .into_iter()
            .filter(|d| d.label == InclusiveLabel::Inclusive)
            .map(|d| d.sub_event)
            .collect())
    }

    /// Scores every candidate as a potential start of `main_event`'s
    /// script.
    pub fn start_scores(
        &self,
        main_event: &str,
        candidates: &[SubEvent],
    ) -> Result<Vec<StartScore>, TaskError> {
        candidates
            .iter()
            .map(|c| {
                let query = self
                    .prompts
                    .render(TaskKind::Start, &Bindings::main_sub(main_event, c.text()))?;
                let score = self.start_backend.score_sequence(&query)?;
                Ok(StartScore { sub_event: c.clone(), score })
            })
            .collect()
    }

    /// The highest-scoring candidate; ties break to the
    /// lexicographically smallest sub-event text.
    pub fn select_start(
        &self,
        main_event: &str,
        candidates: &[SubEvent],
    ) -> Result<SubEvent, TaskError> {
        let scores = self.start_scores(main_event, candidates)?;
        Ok(pick_start(&scores).ok_or(TaskError::EmptyCandidates)?.sub_event.clone())
    }

    /// Predicts the temporal relation of a distinct event pair. Only
    /// the canonical direction (lexicographically smaller text in slot
    /// `{a}`) is queried; the reverse is defined as the negation.
    pub fn predict_relation(
        &self,
        event_a: &SubEvent,
        event_b: &SubEvent,
    ) -> Result<TemporalDecision, TaskError> {
        if event_a.text() == event_b.text() {
            return Err(TaskError::IdenticalEvents(event_a.text().to_string()));
        }
        let flipped = event_a.text() > event_b.text();
        let (first, second) = if flipped { (event_b, event_a) } else { (event_a, event_b) };

        let mut margin = self.raw_margin(first, second)?;
        if self.both_directions {
            margin = (margin - self.raw_margin(second, first)?) / 2.0;
        }
        if flipped {
            margin = -margin;
        }
        Ok(TemporalDecision {
            event_a: event_a.clone(),
            event_b: event_b.clone(),
            margin,
            relation: if margin > 0.0 {
                TemporalLabel::Before
            } else {
                TemporalLabel::After
            },
        })
    }

    fn raw_margin(&self, a: &SubEvent, b: &SubEvent) -> Result<f64, TaskError> {
        let query = self
            .prompts
            .render(TaskKind::Temporal, &Bindings::pair(a.text(), b.text()))?;
        self.masked_margin(self.temporal_backend.as_ref(), &query)
    }
}

/// Argmax with the lexicographic tie rule shared by start selection.
pub(crate) fn pick_start(scores: &[StartScore]) -> Option<&StartScore> {
    scores.iter().reduce(|best, s| {
        if s.score > best.score
            || (s.score == best.score && s.sub_event.text() < best.sub_event.text())
        {
            s
        } else {
            best
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Scenario, Script, ScriptCorpus};
    use crate::scorer::MockBackend;

    fn sub(t: &str) -> SubEvent {
        SubEvent::new(t).unwrap()
    }

    fn gold_corpus() -> ScriptCorpus {
        let events = vec![sub("gather dirty clothes."), sub("load the machine."), sub("start the wash.")];
        ScriptCorpus::new(vec![Scenario::new(
            "s1",
            "Clean laundry",
            vec![Script::new(events).unwrap()],
        )
        .unwrap()])
        .unwrap()
    }

    fn consistent_prober() -> Prober {
        Prober::new(
            Arc::new(MockBackend::consistent_with(&gold_corpus(), 1)),
            PromptSet::default(),
        )
    }

    #[test]
    fn margin_loss_closed_forms() {
        assert!((margin_loss(2.5, &[1.0, 1.4], 1.0) - 0.0).abs() < 1e-9);
        assert!((margin_loss(0.5, &[0.2, 0.7], 1.0) - 1.9).abs() < 1e-9);
        assert!((margin_loss(0.5, &[], 1.0) - 0.0).abs() < 1e-9);
    }

    #[test]
    fn gold_pair_is_inclusive() {
        let p = consistent_prober();
        let d = p
            .predict_inclusive("Clean laundry", &sub("gather dirty clothes."))
            .unwrap();
        assert_eq!(d.label, InclusiveLabel::Inclusive);
        assert!(d.margin > 0.0);
    }

    #[test]
    fn foreign_pair_is_exclusive() {
        let p = consistent_prober();
        let d = p
            .predict_inclusive("Clean laundry", &sub("board the bus."))
            .unwrap();
        assert_eq!(d.label, InclusiveLabel::Exclusive);
    }

    #[test]
    fn zero_margin_maps_to_exclusive() {
        let backend = MockBackend::new(0)
            .with_mask_score("m [MASK] s", "include", 0.7)
            .with_mask_score("m [MASK] s", "except", 0.7);
        let p = Prober::new(Arc::new(backend), PromptSet::default());
        let d = p.predict_inclusive("m", &sub("s")).unwrap();
        assert_eq!(d.margin, 0.0);
        assert_eq!(d.label, InclusiveLabel::Exclusive);
    }

    #[test]
    fn select_inclusive_recovers_gold_and_preserves_order() {
        let p = consistent_prober();
        let pool = vec![
            sub("board the bus."),
            sub("load the machine."),
            sub("gather dirty clothes."),
            sub("buy a ticket."),
            sub("start the wash."),
        ];
        let selected = p.select_inclusive("Clean laundry", &pool).unwrap();
        assert_eq!(
            selected.iter().map(|e| e.text()).collect::<Vec<_>>(),
            vec!["load the machine.", "gather dirty clothes.", "start the wash."]
        );
    }

    #[test]
    fn adversarial_backend_selects_nothing() {
        let p = Prober::new(
            Arc::new(MockBackend::all_exclusive(&gold_corpus(), 1)),
            PromptSet::default(),
        );
        let pool = vec![sub("gather dirty clothes."), sub("load the machine.")];
        assert!(p.select_inclusive("Clean laundry", &pool).unwrap().is_empty());
    }

    #[test]
    fn select_start_argmax_and_ties() {
        let backend = MockBackend::new(0)
            .with_sequence_score("Taking bus start with find bus stop", 0.9)
            .with_sequence_score("Taking bus start with board bus", 0.1);
        let p = Prober::new(Arc::new(backend), PromptSet::default());
        let picked = p
            .select_start("Taking bus", &[sub("find bus stop"), sub("board bus")])
            .unwrap();
        assert_eq!(picked.text(), "find bus stop");

        let tied = MockBackend::new(0)
            .with_sequence_score("m start with b", 0.5)
            .with_sequence_score("m start with a", 0.5)
            .with_sequence_score("m start with c", 0.5);
        let p = Prober::new(Arc::new(tied), PromptSet::default());
        let picked = p.select_start("m", &[sub("b"), sub("a"), sub("c")]).unwrap();
        assert_eq!(picked.text(), "a");
    }

    #[test]
    fn select_start_single_candidate_and_empty() {
        let p = consistent_prober();
        let only = sub("load the machine.");
        assert_eq!(p.select_start("Clean laundry", &[only.clone()]).unwrap(), only);
        assert!(matches!(
            p.select_start("Clean laundry", &[]),
            Err(TaskError::EmptyCandidates)
        ));
    }

    #[test]
    fn relation_follows_gold_order() {
        let p = consistent_prober();
        let d = p
            .predict_relation(&sub("gather dirty clothes."), &sub("load the machine."))
            .unwrap();
        assert_eq!(d.relation, TemporalLabel::Before);
        assert!(d.margin > 0.0);
    }

    #[test]
    fn reverse_relation_is_the_negation() {
        let p = consistent_prober();
        let a = sub("gather dirty clothes.");
        let b = sub("start the wash.");
        let ab = p.predict_relation(&a, &b).unwrap();
        let ba = p.predict_relation(&b, &a).unwrap();
        assert_eq!(ab.margin, -ba.margin);
        assert_eq!(ab.relation, TemporalLabel::Before);
        assert_eq!(ba.relation, TemporalLabel::After);
    }

    #[test]
    fn zero_temporal_margin_maps_to_after() {
        let backend = MockBackend::new(0)
            .with_mask_score("a [MASK] b", "before", 1.3)
            .with_mask_score("a [MASK] b", "after", 1.3);
        let p = Prober::new(Arc::new(backend), PromptSet::default());
        let d = p.predict_relation(&sub("a"), &sub("b")).unwrap();
        assert_eq!(d.margin, 0.0);
        assert_eq!(d.relation, TemporalLabel::After);
    }

    #[test]
    fn both_directions_averages_the_two_queries() {
        let backend = MockBackend::new(0)
            .with_mask_score("a [MASK] b", "before", 2.0)
            .with_mask_score("a [MASK] b", "after", 0.0) // margin +2
            .with_mask_score("b [MASK] a", "before", 1.0)
            .with_mask_score("b [MASK] a", "after", 2.0); // margin -1, i.e. +1 for (a,b)
        let mut p = Prober::new(Arc::new(backend), PromptSet::default());
        p.both_directions = true;
        let d = p.predict_relation(&sub("a"), &sub("b")).unwrap();
        assert!((d.margin - 1.5).abs() < 1e-12);
        assert_eq!(d.relation, TemporalLabel::Before);
        // negation still holds for the reverse call
        let r = p.predict_relation(&sub("b"), &sub("a")).unwrap();
        assert_eq!(r.margin, -d.margin);
    }

    #[test]
    fn identical_events_rejected() {
        let p = consistent_prober();
        let e = sub("load the machine.");
        assert!(matches!(
            p.predict_relation(&e, &e),
            Err(TaskError::IdenticalEvents(_))
        ));
    }

    #[test]
    fn canonicalization_queries_once_per_unordered_pair() {
        use crate::scorer::CountingBackend;
        let counting = Arc::new(CountingBackend::new(MockBackend::consistent_with(
            &gold_corpus(),
            1,
        )));
        let p = Prober::new(counting.clone(), PromptSet::default());
        let a = sub("gather dirty clothes.");
        let b = sub("load the machine.");
        p.predict_relation(&a, &b).unwrap();
        p.predict_relation(&b, &a).unwrap();
        assert_eq!(counting.mask_calls(), 2); // one per call, same direction inside
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn margin_loss_non_negative_and_zero_iff_satisfied(
                pos in -5.0f64..5.0,
                negs in prop::collection::vec(-5.0f64..5.0, 0..8),
                m in 0.01f64..3.0
            ) {
                let loss = margin_loss(pos, &negs, m);
                prop_assert!(loss >= 0.0);
                let satisfied = negs.iter().all(|n| pos >= n + m);
                prop_assert_eq!(loss == 0.0, satisfied);
            }

            #[test]
            fn margin_loss_weakly_decreasing_in_positive(
                pos in -5.0f64..5.0,
                delta in 0.0f64..2.0,
                negs in prop::collection::vec(-5.0f64..5.0, 0..8),
                m in 0.01f64..3.0
            ) {
                prop_assert!(margin_loss(pos + delta, &negs, m) <= margin_loss(pos, &negs, m));
            }

            #[test]
            fn start_selection_invariant_under_monotone_transform(
                raw in prop::collection::vec(-10.0f64..10.0, 1..6),
                scale in 0.1f64..4.0,
                shift in -3.0f64..3.0
            ) {
                let scores = symbols_to_scores(&raw);
                let transformed: Vec<StartScore> = scores
                    .iter()
                    .map(|s| StartScore {
                        sub_event: s.sub_event.clone(),
                        score: s.score * scale + shift,
                    })
                    .collect();
                let a = pick_start(&scores).unwrap();
                let b = pick_start(&transformed).unwrap();
                prop_assert_eq!(&a.sub_event, &b.sub_event);
            }
        }

        fn symbols_to_scores(raw: &[f64]) -> Vec<StartScore> {
            raw.iter()
                .enumerate()
                .map(|(i, s)| StartScore {
                    sub_event: SubEvent::new(format!("event {i}")).unwrap(),
                    score: *s,
                })
                .collect()
        }
    }
}
