//! Script-knowledge probing and induction on top of masked-LM scorers.
//!
//! The library is organized around three probing tasks over scenario
//! scripts (ordered sub-event sequences):
//!
//! 1. inclusive sub-event selection — does a sub-event belong to the
//!    script of a main event? (cloze query, `include` vs `except`)
//! 2. starting sub-event selection — which sub-event starts the script?
//!    (sequence scoring with a margin ranking loss)
//! 3. temporal ordering — does event A happen before or after event B?
//!    (cloze query, `before` vs `after`)
//!
//! [`induction`] composes the three tasks into an end-to-end pipeline
//! that induces a full script for a main event from a candidate pool,
//! and [`evaluation`] scores the result with LCS/ROUGE-L plus per-task
//! metrics. Scoring itself goes through the [`scorer::ScorerBackend`]
//! trait, with a deterministic mock, a small trainable embedding model,
//! and a subprocess bridge to an external masked LM.

pub mod corpus;
pub mod evaluation;
pub mod induction;
pub mod prompting;
pub mod scorer;
pub mod tasks;
pub mod text;

pub use corpus::{Scenario, Script, ScriptCorpus, SplitSpec, SubEvent};
pub use induction::{InducedScript, RelationMatrix};
pub use prompting::{MaskQuery, PromptSet, SoftPromptConfig, TaskKind, Template, Verbalizer};
pub use scorer::{CandidateScores, Hyperparams, ScorerBackend, TrainingRegime};
pub use tasks::Prober;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
