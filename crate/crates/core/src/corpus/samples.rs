//! Task-specific training and evaluation samples, built from a corpus.
//!
//! All builders are pure functions of (corpus, config, seed); rerunning
//! them yields byte-identical sample lists.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, ScriptCorpus, SubEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InclusiveLabel {
    Inclusive,
    Exclusive,
}

/// One (main event, sub-event) classification row for the inclusive
/// selection task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusiveSample {
    pub main_event: String,
    pub sub_event: SubEvent,
    pub label: InclusiveLabel,
}

/// One starting-selection training group: the script's first event as
/// the positive, the rest of the same script as negatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartSampleGroup {
    pub main_event: String,
    pub positive: SubEvent,
    pub negatives: Vec<SubEvent>,
}

/// Output of [`build_start_samples`]: the groups plus a count of
/// single-event scripts that were skipped (no negatives exist).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartSamples {
    pub groups: Vec<StartSampleGroup>,
    pub skipped_single_event: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemporalLabel {
    Before,
    After,
}

/// One ordered event pair; `label` is `Before` iff `event_a` precedes
/// `event_b` in the source script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSample {
    pub event_a: SubEvent,
    pub event_b: SubEvent,
    pub label: TemporalLabel,
}

/// How temporal pairs are drawn from each script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalMode {
    /// For each event with at least one successor, pick one successor
    /// uniformly at random.
    SampleOne,
    /// Emit every (i, j) pair with i < j.
    AllPairs,
}

/// Builds inclusive-task samples from the training split.
///
/// Every gold sub-event of every script yields one `Inclusive` sample.
/// Per script, `min(neg_multiplier * positives, foreign pool size)`
/// `Exclusive` samples are drawn without replacement from the
/// deduplicated sub-events of other scenarios (texts also occurring in
/// the sample's own scenario are excluded from its pool).
pub fn build_inclusive_samples(
    train: &ScriptCorpus,
    neg_multiplier: usize,
    seed: u64,
) -> Result<Vec<InclusiveSample>, CorpusError> {
    if train.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if train.len() < 2 {
        return Err(CorpusError::NoNegativePool);
    }

    // Deduplicated sub-events in first-occurrence order, tagged with the
    // set of scenarios each text appears in.
    let mut pool: Vec<SubEvent> = Vec::new();
    let mut owners: Vec<HashSet<usize>> = Vec::new();
    let mut index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    // two passes so the borrow of texts outlives the map keys
    let all: Vec<(usize, &SubEvent)> = train
        .scenarios()
        .iter()
        .enumerate()
        .flat_map(|(si, sc)| {
            sc.scripts
                .iter()
                .flat_map(move |script| script.events().iter().map(move |e| (si, e)))
        })
        .collect();
    for (si, e) in &all {
        match index.get(e.text()) {
            Some(&pi) => {
                owners[pi].insert(*si);
            }
            None => {
                index.insert(e.text(), pool.len());
                owners.push(HashSet::from([*si]));
                pool.push((*e).clone());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (si, scenario) in train.scenarios().iter().enumerate() {
        let foreign: Vec<&SubEvent> = pool
            .iter()
            .zip(&owners)
            .filter(|(_, own)| !own.contains(&si))
            .map(|(e, _)| e)
            .collect();
        for script in &scenario.scripts {
            for e in script.events() {
                out.push(InclusiveSample {
                    main_event: scenario.main_event.clone(),
                    sub_event: e.clone(),
                    label: InclusiveLabel::Inclusive,
                });
            }
            let want = neg_multiplier.saturating_mul(script.len());
            let n_neg = want.min(foreign.len());
            let picks = rand::seq::index::sample(&mut rng, foreign.len(), n_neg);
            for pi in picks.iter() {
                out.push(InclusiveSample {
                    main_event: scenario.main_event.clone(),
                    sub_event: foreign[pi].clone(),
                    label: InclusiveLabel::Exclusive,
                });
            }
        }
    }
    Ok(out)
}

/// Builds one starting-selection group per script with at least two
/// events; single-event scripts are skipped and counted.
pub fn build_start_samples(train: &ScriptCorpus) -> StartSamples {
    let mut groups = Vec::new();
    let mut skipped = 0;
    for scenario in train.scenarios() {
        for script in &scenario.scripts {
            if script.len() < 2 {
                skipped += 1;
                continue;
            }
            groups.push(StartSampleGroup {
                main_event: scenario.main_event.clone(),
                positive: script.first().clone(),
                negatives: script.events()[1..].to_vec(),
            });
        }
    }
    StartSamples {
        groups,
        skipped_single_event: skipped,
    }
}

/// Builds temporal-ordering pairs from the training split.
///
/// Each emitted pair is independently order-swapped with probability
/// 0.5 and the label flipped accordingly, so `Before`/`After` are
/// balanced in expectation.
pub fn build_temporal_samples(
    train: &ScriptCorpus,
    mode: TemporalMode,
    seed: u64,
) -> Vec<TemporalSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for scenario in train.scenarios() {
        for script in &scenario.scripts {
            let events = script.events();
            match mode {
                TemporalMode::AllPairs => {
                    for i in 0..events.len() {
                        for j in i + 1..events.len() {
                            out.push(emit_pair(&events[i], &events[j], &mut rng));
                        }
                    }
                }
                TemporalMode::SampleOne => {
                    for i in 0..events.len().saturating_sub(1) {
                        let j = rng.gen_range(i + 1..events.len());
                        out.push(emit_pair(&events[i], &events[j], &mut rng));
                    }
                }
            }
        }
    }
    out
}

fn emit_pair(earlier: &SubEvent, later: &SubEvent, rng: &mut ChaCha8Rng) -> TemporalSample {
    if rng.gen_bool(0.5) {
        TemporalSample {
            event_a: later.clone(),
            event_b: earlier.clone(),
            label: TemporalLabel::After,
        }
    } else {
        TemporalSample {
            event_a: earlier.clone(),
            event_b: later.clone(),
            label: TemporalLabel::Before,
        }
    }
}

/// The evaluation candidate pool: the union of all sub-events across
/// all evaluation scripts, deduplicated by exact text, in first-
/// occurrence order.
pub fn build_candidate_pool(eval: &ScriptCorpus) -> Vec<SubEvent> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for scenario in eval.scenarios() {
        for script in &scenario.scripts {
            for e in script.events() {
                if seen.insert(e.text().to_string()) {
                    pool.push(e.clone());
                }
            }
        }
    }
    pool
}
