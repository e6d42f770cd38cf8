//! Scoring backends: the trait every probe runs against, shared
//! training types, and the concrete implementations (deterministic
//! mock, small trainable embedding model, external-process bridge).

mod external;
mod mock;
mod tiny;

pub use external::{ExternalLm, ExternalLmConfig};
pub use mock::MockBackend;
pub use tiny::{Checkpoint, LossMode, TinyLm, TinyLmConfig};

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{InclusiveSample, StartSampleGroup, TemporalSample};
use crate::prompting::MaskQuery;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("query has no mask position; mask-candidate scoring requires one")]
    MissingMask,
    #[error("query has a mask; sequence scoring requires a maskless query")]
    UnexpectedMask,
    #[error("no candidates requested")]
    NoCandidates,
    #[error("backend produced a non-finite score for {0:?}")]
    NonFiniteScore(String),
    #[error("training requires a non-empty sample list")]
    EmptyTrainingData,
    #[error("the Pretrained regime performs no updates; nothing to fit")]
    PretrainedIsNoOp,
    #[error("regime {0:?} requires allocated soft-prompt parameters")]
    MissingSoftPrompts(TrainingRegime),
    #[error("regime {0:?} must not have soft-prompt parameters allocated")]
    UnexpectedSoftPrompts(TrainingRegime),
    #[error("template error during training: {0}")]
    Template(#[from] crate::prompting::TemplateError),
    #[error("bridge process error: {0}")]
    Bridge(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Per-candidate scores from one mask query. Scores are comparable
/// within one call (higher = more probable) and always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    scores: Vec<(String, f64)>,
}

impl CandidateScores {
    pub fn new(scores: Vec<(String, f64)>) -> Result<Self, ScorerError> {
        if scores.is_empty() {
            return Err(ScorerError::NoCandidates);
        }
        for (tok, s) in &scores {
            if !s.is_finite() {
                return Err(ScorerError::NonFiniteScore(tok.clone()));
            }
        }
        Ok(CandidateScores { scores })
    }

    pub fn get(&self, candidate: &str) -> Option<f64> {
        self.scores
            .iter()
            .find(|(t, _)| t == candidate)
            .map(|(_, s)| *s)
    }

    /// score(a) - score(b); both candidates must be present.
    pub fn margin(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(a)? - self.get(b)?)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(t, s)| (t.as_str(), *s))
    }
}

/// Abstract masked-token / sequence scorer.
///
/// Implementations must be deterministic for a fixed state and safe to
/// share across threads for read-only scoring.
pub trait ScorerBackend: Send + Sync {
    /// Log-probabilities (or monotone equivalents) of each candidate
    /// token at the query's mask position.
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError>;

    /// Scalar score of a maskless (start-task) query from the pooled
    /// sequence representation; higher = more likely to be the start.
    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError>;

    /// Whether `s` tokenizes to exactly one token of this backend's
    /// vocabulary. Drives verbalizer validation.
    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError>;
}

impl<T: ScorerBackend + ?Sized> ScorerBackend for &T {
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError> {
        (**self).score_mask_candidates(query, candidates)
    }
    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError> {
        (**self).score_sequence(query)
    }
    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError> {
        (**self).is_single_token(s)
    }
}

impl<T: ScorerBackend + ?Sized> ScorerBackend for std::sync::Arc<T> {
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError> {
        (**self).score_mask_candidates(query, candidates)
    }
    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError> {
        (**self).score_sequence(query)
    }
    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError> {
        (**self).is_single_token(s)
    }
}

/// Wrapper that counts scoring calls; used to audit query budgets.
pub struct CountingBackend<B> {
    inner: B,
    mask_calls: AtomicUsize,
    seq_calls: AtomicUsize,
}

impl<B: ScorerBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            mask_calls: AtomicUsize::new(0),
            seq_calls: AtomicUsize::new(0),
        }
    }

    pub fn mask_calls(&self) -> usize {
        self.mask_calls.load(Ordering::Relaxed)
    }

    pub fn sequence_calls(&self) -> usize {
        self.seq_calls.load(Ordering::Relaxed)
    }
}

impl<B: ScorerBackend> ScorerBackend for CountingBackend<B> {
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError> {
        self.mask_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score_mask_candidates(query, candidates)
    }

    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError> {
        self.seq_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score_sequence(query)
    }

    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError> {
        self.inner.is_single_token(s)
    }
}

/// The four training regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingRegime {
    /// No parameter updates; score with the base state as-is.
    Pretrained,
    /// Update base parameters and task heads; no soft prompts.
    Finetune,
    /// Update soft-prompt and base parameters.
    Ptuning,
    /// Update only soft-prompt parameters.
    PtuningFreeze,
}

impl TrainingRegime {
    pub fn uses_soft_prompts(self) -> bool {
        matches!(self, TrainingRegime::Ptuning | TrainingRegime::PtuningFreeze)
    }

    pub fn updates_base(self) -> bool {
        matches!(self, TrainingRegime::Finetune | TrainingRegime::Ptuning)
    }

    pub fn updates_head(self) -> bool {
        matches!(self, TrainingRegime::Finetune)
    }
}

/// Training hyperparameters. Learning rate and epoch defaults are
/// tunables, not claims: 2e-5 for full updates, 1e-3 for prompt-only,
/// 3 epochs, batch 32. The ranking margin defaults to 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Hyperparams {
    pub fn defaults_for(regime: TrainingRegime) -> Self {
        let learning_rate = if regime == TrainingRegime::PtuningFreeze {
            1e-3
        } else {
            2e-5
        };
        Hyperparams {
            learning_rate,
            epochs: 3,
            batch_size: 32,
            margin: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.learning_rate <= 0.0 {
            return Err("learning_rate must be positive".into());
        }
        if self.epochs == 0 {
            return Err("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if self.margin <= 0.0 {
            return Err("margin must be positive".into());
        }
        Ok(())
    }
}

/// A task-homogeneous training set. The variant fixes which head is
/// trained, so mixed-task lists cannot be constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskDataset {
    Inclusive(Vec<InclusiveSample>),
    Start(Vec<StartSampleGroup>),
    Temporal(Vec<TemporalSample>),
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        match self {
            TaskDataset::Inclusive(v) => v.len(),
            TaskDataset::Start(v) => v.len(),
            TaskDataset::Temporal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task_kind(&self) -> crate::prompting::TaskKind {
        match self {
            TaskDataset::Inclusive(_) => crate::prompting::TaskKind::Inclusive,
            TaskDataset::Start(_) => crate::prompting::TaskKind::Start,
            TaskDataset::Temporal(_) => crate::prompting::TaskKind::Temporal,
        }
    }
}

/// One training-log line: `{epoch, loss, regime, task}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub regime: TrainingRegime,
    pub task: crate::prompting::TaskKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }
}

/// SHA-256 checksums of the three parameter groups. Two states are
/// bit-identical in a group iff the hex strings match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamChecksums {
    pub base: String,
    pub head: String,
    pub prompts: Option<String>,
}

pub(crate) fn checksum_f32(parts: &[&[f32]]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for part in parts {
        for v in *part {
            hasher.update(v.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
