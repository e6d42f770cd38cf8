//! End-to-end script induction: compose inclusive selection, start
//! selection, and pairwise ordering into a full script, and aggregate
//! a pairwise-margin tournament into a total order.
//!
//! Ordering uses Copeland aggregation: events are ranked by their
//! number of pairwise wins, ties broken by total margin sum and then
//! by event text. A sign-consistent tournament (one that encodes a
//! total order) is always recovered exactly, since its win counts are
//! n-1, n-2, ..., 0.

use serde::{Deserialize, Serialize};

use crate::corpus::SubEvent;
use crate::tasks::{InclusiveDecision, Prober, StartScore, TaskError};

/// Antisymmetric pairwise margins over a distinct event set:
/// `margin(i, j) > 0` means event i is predicted before event j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMatrix {
    events: Vec<SubEvent>,
    /// row-major n*n, antisymmetric with zero diagonal
    margins: Vec<f64>,
}

impl RelationMatrix {
    /// Builds the matrix from the upper-triangle margins produced by
    /// `margin_fn(i, j)` for i < j; the lower triangle is the negation.
    pub fn from_fn(
        events: Vec<SubEvent>,
        mut margin_fn: impl FnMut(usize, usize) -> Result<f64, TaskError>,
    ) -> Result<Self, TaskError> {
        let n = events.len();
        assert!(n >= 1, "relation matrix requires at least one event");
        assert!(
            {
                let mut texts: Vec<&str> = events.iter().map(|e| e.text()).collect();
                texts.sort_unstable();
                texts.windows(2).all(|w| w[0] != w[1])
            },
            "relation matrix requires distinct events"
        );
        let mut margins = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let m = margin_fn(i, j)?;
                margins[i * n + j] = m;
                margins[j * n + i] = -m;
            }
        }
        Ok(RelationMatrix { events, margins })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[SubEvent] {
        &self.events
    }

    pub fn margin(&self, i: usize, j: usize) -> f64 {
        self.margins[i * self.events.len() + j]
    }

    /// Upper-triangle margins as (event_a, event_b, margin) records.
    pub fn edges(&self) -> Vec<TemporalEdge> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                out.push(TemporalEdge {
                    event_a: self.events[i].clone(),
                    event_b: self.events[j].clone(),
                    margin: self.margin(i, j),
                });
            }
        }
        out
    }
}

/// Queries the prober for every unordered pair (n(n-1)/2 queries) and
/// assembles the antisymmetric matrix.
pub fn build_relation_matrix(
    prober: &Prober,
    events: &[SubEvent],
) -> Result<RelationMatrix, TaskError> {
    RelationMatrix::from_fn(events.to_vec(), |i, j| {
        Ok(prober.predict_relation(&events[i], &events[j])?.margin)
    })
}

/// Copeland ordering of the tournament. With `pinned_start`, that
/// event is removed from scoring, the rest are ordered on the
/// sub-matrix excluding it, and it is prepended.
pub fn order_events(matrix: &RelationMatrix, pinned_start: Option<&SubEvent>) -> Vec<SubEvent> {
    let pinned_idx = pinned_start.map(|p| {
        matrix
            .events()
            .iter()
            .position(|e| e.text() == p.text())
            .expect("pinned start must be one of the matrix events")
    });

    let active: Vec<usize> = (0..matrix.len())
        .filter(|i| Some(*i) != pinned_idx)
        .collect();
    let mut ranked: Vec<(usize, usize, f64)> = active
        .iter()
        .map(|&i| {
            let mut wins = 0usize;
            let mut margin_sum = 0.0f64;
            for &j in &active {
                if i == j {
                    continue;
                }
                let m = matrix.margin(i, j);
                if m > 0.0 {
                    wins += 1;
                }
                margin_sum += m;
            }
            (i, wins, margin_sum)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.partial_cmp(&a.2).expect("finite margins"))
            .then_with(|| matrix.events()[a.0].text().cmp(matrix.events()[b.0].text()))
    });

    let mut out = Vec::with_capacity(matrix.len());
    if let Some(p) = pinned_idx {
        out.push(matrix.events()[p].clone());
    }
    out.extend(ranked.into_iter().map(|(i, _, _)| matrix.events()[i].clone()));
    out
}

/// One upper-triangle margin record, for provenance serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub event_a: SubEvent,
    pub event_b: SubEvent,
    pub margin: f64,
}

/// Everything the pipeline decided along the way.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// one inclusive margin per pool element
    pub inclusive: Vec<InclusiveDecision>,
    /// one start score per selected element
    pub start: Vec<StartScore>,
    /// n(n-1)/2 pairwise margins over the selected set
    pub temporal: Vec<TemporalEdge>,
}

/// The pipeline's output for one main event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedScript {
    pub main_event: String,
    pub events: Vec<SubEvent>,
    pub start_event: Option<SubEvent>,
    pub degenerate: bool,
    pub provenance: Provenance,
}

/// Runs the three-step pipeline for `main_event` over a candidate
/// pool: select the inclusive subset, pick its start, order the rest
/// by pairwise relations with the start pinned first.
///
/// An empty inclusive selection yields a degenerate script (no start,
/// no events) rather than an error, so per-stage failures stay
/// measurable.
pub fn induce_script(
    prober: &Prober,
    main_event: &str,
    pool: &[SubEvent],
) -> Result<InducedScript, TaskError> {
    if pool.is_empty() {
        return Err(TaskError::EmptyCandidates);
    }
    let inclusive = prober.inclusive_decisions(main_event, pool)?;
    let selected: Vec<SubEvent> = inclusive
        .iter()
        .filter(|d| d.label == crate::corpus::InclusiveLabel::Inclusive)
        .map(|d| d.sub_event.clone())
        .collect();
    if selected.is_empty() {
        return Ok(InducedScript {
            main_event: main_event.to_string(),
            events: Vec::new(),
            start_event: None,
            degenerate: true,
            provenance: Provenance { inclusive, ..Provenance::default() },
        });
    }

    let start_scores = prober.start_scores(main_event, &selected)?;
    let start = crate::tasks::pick_start(&start_scores)
        .expect("selected set is non-empty")
        .sub_event
        .clone();

    let matrix = build_relation_matrix(prober, &selected)?;
    let ordered = order_events(&matrix, Some(&start));

    Ok(InducedScript {
        main_event: main_event.to_string(),
        events: ordered,
        start_event: Some(start),
        degenerate: false,
        provenance: Provenance {
            inclusive,
            start: start_scores,
            temporal: matrix.edges(),
        },
    })
}
