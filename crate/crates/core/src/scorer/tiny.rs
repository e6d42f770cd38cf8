//! A small trainable scoring backend over feature-hashed embeddings.
//!
//! The model is deliberately tiny: token vectors are mean-pooled into a
//! context representation, mask candidates are scored against output
//! embeddings, and maskless queries are scored by a linear head on the
//! pooled representation (the bag-model analog of a classification-
//! token readout). What matters for the library is that it implements
//! the full backend contract — including soft prompts, all four
//! training regimes with their parameter-group discipline, and
//! bit-exact checksums — while staying fast and deterministic enough
//! for CI.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::corpus::{InclusiveLabel, TemporalLabel};
use crate::prompting::{
    soft_prompt_layout, MaskQuery, PromptInit, PromptSet, PromptSlot, RelationLabel,
    SequencePiece, SoftPromptConfig, TaskKind, Vocabulary,
};
use crate::text::stable_hash64;

use super::{
    checksum_f32, CandidateScores, EpochRecord, Hyperparams, ParamChecksums, ScorerBackend,
    ScorerError, TaskDataset, TrainingLog, TrainingRegime,
};

/// Which loss drives mask-candidate training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Cross-entropy restricted to the two verbalizer tokens (the
    /// inference-time contrast).
    #[default]
    PairContrast,
    /// Cross-entropy over the whole hashed vocabulary.
    FullVocab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyLmConfig {
    pub buckets: usize,
    pub dim: usize,
    pub seed: u64,
    pub soft_prompt: Option<SoftPromptConfig>,
    pub loss: LossMode,
}

impl Default for TinyLmConfig {
    fn default() -> Self {
        TinyLmConfig {
            buckets: 2048,
            dim: 32,
            seed: 0,
            soft_prompt: None,
            loss: LossMode::PairContrast,
        }
    }
}

/// Parameter groups: `embed`/`out_embed` are the base, the linear
/// sequence head is the task head, prompt vectors (when allocated) are
/// the soft prompts.
pub struct TinyLm {
    cfg: TinyLmConfig,
    embed: Vec<f32>,
    out_embed: Vec<f32>,
    head_w: Vec<f32>,
    head_b: f32,
    prompts: Option<Vec<f32>>,
    vocab: Vocabulary,
}

enum Item {
    Token(usize),
    Prompt(usize),
    Mask,
}

impl TinyLm {
    pub fn new(cfg: TinyLmConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0f32, 0.1).expect("valid stddev");
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
            (0..n).map(|_| normal.sample(rng)).collect()
        };
        let embed = draw(cfg.buckets * cfg.dim, &mut rng);
        let out_embed = draw(cfg.buckets * cfg.dim, &mut rng);
        let head_w = draw(cfg.dim, &mut rng);
        let head_b = normal.sample(&mut rng);
        let prompts = cfg.soft_prompt.as_ref().map(|sp| {
            let n = sp.total_tokens() * cfg.dim;
            match sp.init {
                PromptInit::RandomNormal => draw(n, &mut rng),
                PromptInit::VocabSample => {
                    // copy the embeddings of sampled buckets
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..sp.total_tokens() {
                        let b = rng.gen_range(0..cfg.buckets);
                        v.extend_from_slice(&embed[b * cfg.dim..(b + 1) * cfg.dim]);
                    }
                    v
                }
            }
        });
        TinyLm {
            cfg,
            embed,
            out_embed,
            head_w,
            head_b,
            prompts,
            vocab: Vocabulary::builtin(),
        }
    }

    pub fn config(&self) -> &TinyLmConfig {
        &self.cfg
    }

    pub fn has_prompts(&self) -> bool {
        self.prompts.is_some()
    }

    fn bucket(&self, token: &str) -> usize {
        (stable_hash64(&["tok", token]) % self.cfg.buckets as u64) as usize
    }

    fn embed_vec(&self, bucket: usize) -> &[f32] {
        &self.embed[bucket * self.cfg.dim..(bucket + 1) * self.cfg.dim]
    }

    fn out_vec(&self, bucket: usize) -> &[f32] {
        &self.out_embed[bucket * self.cfg.dim..(bucket + 1) * self.cfg.dim]
    }

    fn prompt_vec(&self, flat: usize) -> &[f32] {
        let p = self.prompts.as_ref().expect("prompt access without allocation");
        &p[flat * self.cfg.dim..(flat + 1) * self.cfg.dim]
    }

    fn prompt_flat_index(&self, slot: PromptSlot, index: usize) -> usize {
        let sp = self.cfg.soft_prompt.as_ref().expect("prompt layout without config");
        let slot_pos = sp
            .slots
            .iter()
            .position(|s| *s == slot)
            .expect("layout only emits configured slots");
        slot_pos * sp.tokens_per_slot + index
    }

    fn items(&self, query: &MaskQuery) -> Vec<Item> {
        if let (Some(sp), Some(_)) = (self.cfg.soft_prompt.as_ref(), self.prompts.as_ref()) {
            soft_prompt_layout(query, sp)
                .into_iter()
                .map(|p| match p {
                    SequencePiece::Token(t) => Item::Token(self.bucket(&t)),
                    SequencePiece::Prompt { slot, index } => {
                        Item::Prompt(self.prompt_flat_index(slot, index))
                    }
                    SequencePiece::Mask => Item::Mask,
                })
                .collect()
        } else {
            crate::text::basic_tokenize(&query.rendered_text)
                .into_iter()
                .map(|t| {
                    if t == crate::text::MASK_TOKEN {
                        Item::Mask
                    } else {
                        Item::Token(self.bucket(&t))
                    }
                })
                .collect()
        }
    }

    /// Mean of all non-mask item vectors.
    fn pool(&self, items: &[Item]) -> (Vec<f32>, usize) {
        let dim = self.cfg.dim;
        let mut ctx = vec![0.0f32; dim];
        let mut n = 0usize;
        for item in items {
            let v = match item {
                Item::Token(b) => self.embed_vec(*b),
                Item::Prompt(f) => self.prompt_vec(*f),
                Item::Mask => continue,
            };
            for (c, x) in ctx.iter_mut().zip(v) {
                *c += *x;
            }
            n += 1;
        }
        if n > 0 {
            for c in ctx.iter_mut() {
                *c /= n as f32;
            }
        }
        (ctx, n)
    }

    fn candidate_logit(&self, ctx: &[f32], token: &str) -> f64 {
        dot(ctx, self.out_vec(self.bucket(token))) as f64
    }

    fn sequence_logit(&self, ctx: &[f32]) -> f64 {
        (dot(ctx, &self.head_w) + self.head_b) as f64
    }

    /// Checksums of the three parameter groups.
    pub fn param_checksums(&self) -> ParamChecksums {
        ParamChecksums {
            base: checksum_f32(&[&self.embed, &self.out_embed]),
            head: checksum_f32(&[&self.head_w, &[self.head_b]]),
            prompts: self.prompts.as_ref().map(|p| checksum_f32(&[p])),
        }
    }

    /// Fits the backend on one task dataset under `regime`, returning
    /// the per-epoch training log.
    pub fn fit(
        &mut self,
        prompts: &PromptSet,
        data: &TaskDataset,
        regime: TrainingRegime,
        hp: &Hyperparams,
    ) -> Result<TrainingLog, ScorerError> {
        if regime == TrainingRegime::Pretrained {
            return Err(ScorerError::PretrainedIsNoOp);
        }
        if data.is_empty() {
            return Err(ScorerError::EmptyTrainingData);
        }
        if regime.uses_soft_prompts() && self.prompts.is_none() {
            return Err(ScorerError::MissingSoftPrompts(regime));
        }
        if regime == TrainingRegime::Finetune && self.prompts.is_some() {
            return Err(ScorerError::UnexpectedSoftPrompts(regime));
        }
        let update_prompts = regime.uses_soft_prompts()
            && self
                .cfg
                .soft_prompt
                .as_ref()
                .map(|sp| sp.trainable)
                .unwrap_or(false);
        if regime == TrainingRegime::PtuningFreeze && !update_prompts {
            return Err(ScorerError::MissingSoftPrompts(regime));
        }

        let prepared = self.prepare(prompts, data)?;
        let mut trainer = Trainer {
            update_base: regime.updates_base(),
            update_head: regime.updates_head(),
            update_prompts,
            grad_embed: vec![0.0; self.embed.len()],
            grad_out: vec![0.0; self.out_embed.len()],
            grad_head_w: vec![0.0; self.head_w.len()],
            grad_head_b: 0.0,
            grad_prompts: vec![0.0; self.prompts.as_ref().map_or(0, |p| p.len())],
        };

        let mut log = TrainingLog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        for epoch in 0..hp.epochs {
            let mut order: Vec<usize> = (0..prepared.len()).collect();
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0f64;
            for batch in order.chunks(hp.batch_size) {
                trainer.zero();
                let mut batch_loss = 0.0f64;
                for &i in batch {
                    batch_loss += self.backward(&prepared[i], hp.margin, &mut trainer);
                }
                epoch_loss += batch_loss;
                self.apply(&trainer, hp.learning_rate as f32 / batch.len() as f32);
            }
            log.records.push(EpochRecord {
                epoch,
                loss: epoch_loss / prepared.len() as f64,
                regime,
                task: data.task_kind(),
            });
        }
        Ok(log)
    }

    fn prepare(
        &self,
        prompts: &PromptSet,
        data: &TaskDataset,
    ) -> Result<Vec<PreparedSample>, ScorerError> {
        let mut out = Vec::with_capacity(data.len());
        match data {
            TaskDataset::Inclusive(samples) => {
                let v = &prompts.verbalizer;
                for s in samples {
                    let q = prompts.render(
                        TaskKind::Inclusive,
                        &crate::prompting::Bindings::main_sub(&s.main_event, s.sub_event.text()),
                    )?;
                    let (correct, other) = match s.label {
                        InclusiveLabel::Inclusive => (
                            v.token(RelationLabel::Inclusive),
                            v.token(RelationLabel::Exclusive),
                        ),
                        InclusiveLabel::Exclusive => (
                            v.token(RelationLabel::Exclusive),
                            v.token(RelationLabel::Inclusive),
                        ),
                    };
                    out.push(PreparedSample::Pair {
                        items: self.items(&q),
                        correct: self.bucket(correct),
                        other: self.bucket(other),
                    });
                }
            }
            TaskDataset::Temporal(samples) => {
                let v = &prompts.verbalizer;
                for s in samples {
                    let q = prompts.render(
                        TaskKind::Temporal,
                        &crate::prompting::Bindings::pair(s.event_a.text(), s.event_b.text()),
                    )?;
                    let (correct, other) = match s.label {
                        TemporalLabel::Before => (
                            v.token(RelationLabel::Before),
                            v.token(RelationLabel::After),
                        ),
                        TemporalLabel::After => (
                            v.token(RelationLabel::After),
                            v.token(RelationLabel::Before),
                        ),
                    };
                    out.push(PreparedSample::Pair {
                        items: self.items(&q),
                        correct: self.bucket(correct),
                        other: self.bucket(other),
                    });
                }
            }
            TaskDataset::Start(groups) => {
                for g in groups {
                    let render = |sub: &str| -> Result<Vec<Item>, ScorerError> {
                        let q = prompts.render(
                            TaskKind::Start,
                            &crate::prompting::Bindings::main_sub(&g.main_event, sub),
                        )?;
                        Ok(self.items(&q))
                    };
                    let positive = render(g.positive.text())?;
                    let negatives = g
                        .negatives
                        .iter()
                        .map(|n| render(n.text()))
                        .collect::<Result<Vec<_>, _>>()?;
                    out.push(PreparedSample::Group { positive, negatives });
                }
            }
        }
        Ok(out)
    }

    /// Forward + gradient accumulation for one sample; returns the loss.
    fn backward(&self, sample: &PreparedSample, margin: f64, t: &mut Trainer) -> f64 {
        match sample {
            PreparedSample::Pair { items, correct, other } => match self.cfg.loss {
                LossMode::PairContrast => self.backward_pair(items, *correct, *other, t),
                LossMode::FullVocab => self.backward_full_vocab(items, *correct, t),
            },
            PreparedSample::Group { positive, negatives } => {
                self.backward_margin(positive, negatives, margin, t)
            }
        }
    }

    fn backward_pair(&self, items: &[Item], correct: usize, other: usize, t: &mut Trainer) -> f64 {
        let (ctx, n) = self.pool(items);
        let z_pos = dot(&ctx, self.out_vec(correct)) as f64;
        let z_neg = dot(&ctx, self.out_vec(other)) as f64;
        let diff = z_neg - z_pos;
        let loss = softplus(diff);
        let g = sigmoid(diff) as f32; // dL/dz_neg = g, dL/dz_pos = -g

        if t.update_base {
            axpy(&mut t.grad_out[correct * self.cfg.dim..], -g, &ctx);
            axpy(&mut t.grad_out[other * self.cfg.dim..], g, &ctx);
        }
        if (t.update_base || t.update_prompts) && n > 0 {
            // dL/dctx = g * (O[other] - O[correct])
            let mut dctx = vec![0.0f32; self.cfg.dim];
            axpy(&mut dctx, g, self.out_vec(other));
            axpy(&mut dctx, -g, self.out_vec(correct));
            self.spread_ctx_grad(items, &dctx, n, t);
        }
        loss
    }

    fn backward_full_vocab(&self, items: &[Item], correct: usize, t: &mut Trainer) -> f64 {
        let (ctx, n) = self.pool(items);
        let dim = self.cfg.dim;
        let mut logits = vec![0.0f64; self.cfg.buckets];
        let mut max = f64::NEG_INFINITY;
        for (b, logit) in logits.iter_mut().enumerate() {
            *logit = dot(&ctx, &self.out_embed[b * dim..(b + 1) * dim]) as f64;
            max = max.max(*logit);
        }
        let mut denom = 0.0f64;
        for l in &logits {
            denom += (l - max).exp();
        }
        let log_denom = max + denom.ln();
        let loss = log_denom - logits[correct];

        let mut dctx = vec![0.0f32; dim];
        for (b, l) in logits.iter().enumerate() {
            let p = ((l - max).exp() / denom) as f32;
            let coeff = p - if b == correct { 1.0 } else { 0.0 };
            if t.update_base {
                axpy(&mut t.grad_out[b * dim..], coeff, &ctx);
            }
            axpy(&mut dctx, coeff, self.out_vec(b));
        }
        if (t.update_base || t.update_prompts) && n > 0 {
            self.spread_ctx_grad(items, &dctx, n, t);
        }
        loss
    }

    fn backward_margin(
        &self,
        positive: &[Item],
        negatives: &[Vec<Item>],
        margin: f64,
        t: &mut Trainer,
    ) -> f64 {
        let (pos_ctx, pos_n) = self.pool(positive);
        let pos_score = self.sequence_logit(&pos_ctx);
        let mut loss = 0.0f64;
        let mut pos_coeff = 0.0f32;
        for neg in negatives {
            let (neg_ctx, neg_n) = self.pool(neg);
            let neg_score = self.sequence_logit(&neg_ctx);
            let violation = neg_score + margin - pos_score;
            if violation > 0.0 {
                loss += violation;
                pos_coeff -= 1.0;
                // dL/d neg_score = 1
                if t.update_head {
                    axpy(&mut t.grad_head_w, 1.0, &neg_ctx);
                    t.grad_head_b += 1.0;
                }
                if (t.update_base || t.update_prompts) && neg_n > 0 {
                    let dctx = self.head_w.clone(); // dL/d neg_ctx = w
                    self.spread_ctx_grad(neg, &dctx, neg_n, t);
                }
            }
        }
        if pos_coeff != 0.0 {
            if t.update_head {
                axpy(&mut t.grad_head_w, pos_coeff, &pos_ctx);
                t.grad_head_b += pos_coeff;
            }
            if (t.update_base || t.update_prompts) && pos_n > 0 {
                let mut dctx = vec![0.0f32; self.cfg.dim];
                axpy(&mut dctx, pos_coeff, &self.head_w);
                self.spread_ctx_grad(positive, &dctx, pos_n, t);
            }
        }
        loss
    }

    /// Distributes a gradient w.r.t. the pooled context onto the item
    /// vectors that were averaged into it.
    fn spread_ctx_grad(&self, items: &[Item], dctx: &[f32], n: usize, t: &mut Trainer) {
        let scale = 1.0 / n as f32;
        for item in items {
            match item {
                Item::Token(b) if t.update_base => {
                    axpy(&mut t.grad_embed[b * self.cfg.dim..], scale, dctx);
                }
                Item::Prompt(f) if t.update_prompts => {
                    axpy(&mut t.grad_prompts[f * self.cfg.dim..], scale, dctx);
                }
                _ => {}
            }
        }
    }

    fn apply(&mut self, t: &Trainer, step: f32) {
        if t.update_base {
            sub_scaled(&mut self.embed, step, &t.grad_embed);
            sub_scaled(&mut self.out_embed, step, &t.grad_out);
        }
        if t.update_head {
            sub_scaled(&mut self.head_w, step, &t.grad_head_w);
            self.head_b -= step * t.grad_head_b;
        }
        if t.update_prompts {
            if let Some(p) = self.prompts.as_mut() {
                sub_scaled(p, step, &t.grad_prompts);
            }
        }
    }

    /// Serializes the state. `PtuningFreeze` runs store only the prompt
    /// parameters plus a reference to the (reconstructible) base.
    pub fn checkpoint(&self, regime: TrainingRegime) -> Checkpoint {
        if regime == TrainingRegime::PtuningFreeze {
            let sums = self.param_checksums();
            Checkpoint::PromptOnly {
                config: self.cfg.clone(),
                prompts: self.prompts.clone().unwrap_or_default(),
                base_checksum: sums.base,
                head_checksum: sums.head,
            }
        } else {
            Checkpoint::Full {
                config: self.cfg.clone(),
                embed: self.embed.clone(),
                out_embed: self.out_embed.clone(),
                head_w: self.head_w.clone(),
                head_b: self.head_b,
                prompts: self.prompts.clone(),
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, regime: TrainingRegime) -> Result<(), ScorerError> {
        let ckpt = self.checkpoint(regime);
        let json = serde_json::to_string(&ckpt)
            .map_err(|e| ScorerError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ScorerError::Checkpoint(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScorerError> {
        let json = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ScorerError::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
        let ckpt: Checkpoint =
            serde_json::from_str(&json).map_err(|e| ScorerError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, ScorerError> {
        match ckpt {
            Checkpoint::Full { config, embed, out_embed, head_w, head_b, prompts } => {
                let expected = config.buckets * config.dim;
                if embed.len() != expected || out_embed.len() != expected {
                    return Err(ScorerError::Checkpoint(
                        "embedding size does not match config".into(),
                    ));
                }
                Ok(TinyLm {
                    cfg: config,
                    embed,
                    out_embed,
                    head_w,
                    head_b,
                    prompts,
                    vocab: Vocabulary::builtin(),
                })
            }
            Checkpoint::PromptOnly { config, prompts, base_checksum, head_checksum } => {
                let mut lm = TinyLm::new(config);
                let sums = lm.param_checksums();
                if sums.base != base_checksum || sums.head != head_checksum {
                    return Err(ScorerError::Checkpoint(
                        "reconstructed base does not match the recorded checksums".into(),
                    ));
                }
                if lm.prompts.as_ref().map(|p| p.len()) != Some(prompts.len()) {
                    return Err(ScorerError::Checkpoint(
                        "prompt parameter shape does not match config".into(),
                    ));
                }
                lm.prompts = Some(prompts);
                Ok(lm)
            }
        }
    }
}

impl ScorerBackend for TinyLm {
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError> {
        if query.mask_index.is_none() {
            return Err(ScorerError::MissingMask);
        }
        if candidates.is_empty() {
            return Err(ScorerError::NoCandidates);
        }
        let (ctx, _) = self.pool(&self.items(query));
        let scores = candidates
            .iter()
            .map(|c| (c.clone(), self.candidate_logit(&ctx, c)))
            .collect();
        CandidateScores::new(scores)
    }

    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError> {
        if query.mask_index.is_some() {
            return Err(ScorerError::UnexpectedMask);
        }
        let (ctx, _) = self.pool(&self.items(query));
        Ok(self.sequence_logit(&ctx))
    }

    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError> {
        Ok(self.vocab.is_single_token(s))
    }
}

/// Serialized backend state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoint {
    Full {
        config: TinyLmConfig,
        embed: Vec<f32>,
        out_embed: Vec<f32>,
        head_w: Vec<f32>,
        head_b: f32,
        prompts: Option<Vec<f32>>,
    },
    PromptOnly {
        config: TinyLmConfig,
        prompts: Vec<f32>,
        base_checksum: String,
        head_checksum: String,
    },
}

enum PreparedSample {
    Pair {
        items: Vec<Item>,
        correct: usize,
        other: usize,
    },
    Group {
        positive: Vec<Item>,
        negatives: Vec<Vec<Item>>,
    },
}

struct Trainer {
    update_base: bool,
    update_head: bool,
    update_prompts: bool,
    grad_embed: Vec<f32>,
    grad_out: Vec<f32>,
    grad_head_w: Vec<f32>,
    grad_head_b: f32,
    grad_prompts: Vec<f32>,
}

impl Trainer {
    fn zero(&mut self) {
        self.grad_embed.fill(0.0);
        self.grad_out.fill(0.0);
        self.grad_head_w.fill(0.0);
        self.grad_head_b = 0.0;
        self.grad_prompts.fill(0.0);
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// out[..dctx.len()] += coeff * dctx
fn axpy(out: &mut [f32], coeff: f32, dctx: &[f32]) {
    for (o, d) in out.iter_mut().zip(dctx) {
        *o += coeff * d;
    }
}

fn sub_scaled(params: &mut [f32], step: f32, grad: &[f32]) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= step * g;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-(x.abs())).exp().ln_1p()
}
