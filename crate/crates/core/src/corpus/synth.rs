//! Seeded synthetic corpus generation for fixtures, demos, and benches.
//!
//! Event texts are drawn from a verb/noun/qualifier product large
//! enough that every sub-event in a generated corpus is globally
//! distinct, which keeps gold-consistent mock scoring unambiguous.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Scenario, Script, ScriptCorpus, SubEvent};

const VERBS: &[&str] = &[
    "gather", "sort", "rinse", "fold", "pack", "open", "close", "check", "clean", "wipe",
    "carry", "place", "stack", "label", "measure", "pour", "mix", "heat", "cool", "store",
    "inspect", "arrange", "collect", "deliver", "unload", "prepare", "trim", "seal", "weigh",
    "scan",
];

const NOUNS: &[&str] = &[
    "clothes", "dishes", "tools", "boxes", "letters", "groceries", "papers", "tickets",
    "bottles", "towels", "folders", "parcels", "ingredients", "utensils", "receipts", "samples",
    "shelves", "drawers", "windows", "tables",
];

const QUALIFIERS: &[&str] = &[
    "in the kitchen", "by the door", "on the shelf", "at the counter", "in the hallway",
    "near the sink", "on the desk", "in the garage", "at the station", "in the office",
    "by the window", "on the cart", "in the basket", "at the entrance", "in the closet",
];

/// Configuration for [`synthetic_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_scenarios: usize,
    pub min_events: usize,
    pub max_events: usize,
    pub seed: u64,
}

/// Generates `n_scenarios` single-script scenarios with uniformly drawn
/// lengths in `[min_events, max_events]`. Deterministic given the seed;
/// all event texts in one call are distinct.
pub fn synthetic_corpus(cfg: &SynthConfig) -> ScriptCorpus {
    assert!(cfg.n_scenarios > 0 && cfg.min_events >= 1 && cfg.min_events <= cfg.max_events);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Sample distinct (verb, noun, qualifier) combinations up front.
    let space = VERBS.len() * NOUNS.len() * QUALIFIERS.len();
    let needed = cfg.n_scenarios * cfg.max_events;
    assert!(needed <= space, "requested corpus exceeds the phrase space");
    let mut combos: Vec<usize> = (0..space).collect();
    combos.shuffle(&mut rng);
    let mut next_combo = combos.into_iter();
    let phrase = |rng_idx: usize| -> String {
        let v = rng_idx % VERBS.len();
        let rest = rng_idx / VERBS.len();
        let n = rest % NOUNS.len();
        let q = rest / NOUNS.len();
        format!("{} the {} {}", VERBS[v], NOUNS[n], QUALIFIERS[q])
    };

    let scenarios = (0..cfg.n_scenarios)
        .map(|i| {
            let len = rng.gen_range(cfg.min_events..=cfg.max_events);
            let events = (0..len)
                .map(|_| SubEvent::new(phrase(next_combo.next().unwrap())).unwrap())
                .collect();
            let main = format!("routine {:03}", i + 1);
            Scenario::new(
                format!("synth-{:03}", i + 1),
                main,
                vec![Script::new(events).unwrap()],
            )
            .unwrap()
        })
        .collect();
    ScriptCorpus::new(scenarios).unwrap()
}
