//! Templates, verbalizers, and rendered mask queries.
//!
//! A [`Template`] is a pattern with named slots (`{main}`, `{sub}`,
//! `{a}`, `{b}`) and at most one `[MASK]` marker. Rendering binds the
//! slots and produces a [`MaskQuery`] carrying the rendered text, the
//! mask's token position, the byte span of every filled slot, and the
//! candidate verbalizer tokens to compare at the mask.
//!
//! Slot values are inserted as-is: original casing and punctuation are
//! preserved because evaluation compares gold strings exactly.

use std::collections::BTreeMap;


use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{basic_tokenize_spans, MASK_TOKEN};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template for {kind:?} must contain exactly {expected} [MASK] marker(s), found {found}")]
    MaskCount {
        kind: TaskKind,
        expected: usize,
        found: usize,
    },
    #[error("unknown slot {{{0}}} in template")]
    UnknownSlot(String),
    #[error("slot {{{0}}} is not bound")]
    UnboundSlot(&'static str),
    #[error("slot {{{0}}} is bound to an empty string")]
    EmptyBinding(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Inclusive,
    Start,
    Temporal,
}

/// Named template slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Main,
    Sub,
    A,
    B,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Main => "main",
            Slot::Sub => "sub",
            Slot::A => "a",
            Slot::B => "b",
        }
    }

    fn from_name(name: &str) -> Option<Slot> {
        match name {
            "main" => Some(Slot::Main),
            "sub" => Some(Slot::Sub),
            "a" => Some(Slot::A),
            "b" => Some(Slot::B),
            _ => None,
        }
    }
}

/// Relation labels a verbalizer can stand for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Inclusive,
    Exclusive,
    Before,
    After,
}

/// Label -> single-vocabulary-token mapping used at the mask position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizer {
    map: BTreeMap<RelationLabel, String>,
}

impl Default for Verbalizer {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert(RelationLabel::Inclusive, "include".to_string());
        map.insert(RelationLabel::Exclusive, "except".to_string());
        map.insert(RelationLabel::Before, "before".to_string());
        map.insert(RelationLabel::After, "after".to_string());
        Verbalizer { map }
    }
}

impl Verbalizer {
    pub fn with(mut self, label: RelationLabel, token: impl Into<String>) -> Self {
        self.map.insert(label, token.into());
        self
    }

    pub fn token(&self, label: RelationLabel) -> &str {
        &self.map[&label]
    }

    /// The (positive, negative) candidate pair for a masked task.
    pub fn pair(&self, kind: TaskKind) -> Option<(&str, &str)> {
        match kind {
            TaskKind::Inclusive => Some((
                self.token(RelationLabel::Inclusive),
                self.token(RelationLabel::Exclusive),
            )),
            TaskKind::Temporal => Some((
                self.token(RelationLabel::Before),
                self.token(RelationLabel::After),
            )),
            TaskKind::Start => None,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = (RelationLabel, &str)> {
        self.map.iter().map(|(l, t)| (*l, t.as_str()))
    }
}

/// Result of checking a verbalizer against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbalizerReport {
    pub failures: Vec<(RelationLabel, String, String)>,
}

impl VerbalizerReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A closed token set with the library tokenizer's notion of what a
/// single token is.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: std::collections::HashSet<String>,
}

impl Vocabulary {
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Self {
        Vocabulary {
            tokens: tokens.into_iter().collect(),
        }
    }

    /// A small built-in English vocabulary; enough for the default
    /// verbalizers and everyday corpus text.
    pub fn builtin() -> Self {
        const WORDS: &str = "include except before after start with the a an and or of in on at \
            by to from into near for is are was were be been do does did done go goes went gone \
            get gets got put puts take takes took make makes made turn turns turned open opens \
            opened close closes closed clean cleans cleaned wash washes washed gather gathers \
            gathered sort sorts sorted fold folds folded pack packs packed check checks checked \
            carry carries carried place places placed stack stacks stacked pour pours poured mix \
            mixes mixed heat heats heated cool cools cooled store stores stored find finds found \
            board boards boarded ride rides rode wait waits waited pay pays paid leave leaves \
            left enter enters entered order orders ordered eat eats ate drink drinks drank \
            clothes dishes tools boxes letters groceries papers tickets bottles towels folders \
            parcels ingredients utensils receipts samples shelves drawers windows tables kitchen \
            door shelf counter hallway sink desk garage station office window cart basket \
            entrance closet laundry dryer bus stop water soap machine detergent dirty wet dry \
            clean hot cold up down out off then first last next this that it them";
        Vocabulary::new(WORDS.split_whitespace().map(|w| w.to_string()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    /// True iff `s` tokenizes to exactly one in-vocabulary token.
    pub fn is_single_token(&self, s: &str) -> bool {
        let toks = crate::text::basic_tokenize(s);
        toks.len() == 1 && toks[0] != MASK_TOKEN && self.contains(&toks[0])
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Checks that every verbalizer string is a single in-vocabulary token.
pub fn validate_verbalizer(verbalizer: &Verbalizer, vocab: &Vocabulary) -> VerbalizerReport {
    validate_verbalizer_with(verbalizer, |s| vocab.is_single_token(s))
}

/// Verbalizer validation against any single-token predicate (used by
/// backends whose vocabulary is not an in-process set).
pub fn validate_verbalizer_with(
    verbalizer: &Verbalizer,
    mut is_single_token: impl FnMut(&str) -> bool,
) -> VerbalizerReport {
    let mut failures = Vec::new();
    for (label, token) in verbalizer.labels() {
        if token.trim().is_empty() {
            failures.push((label, token.to_string(), "empty string".to_string()));
        } else if !is_single_token(token) {
            failures.push((
                label,
                token.to_string(),
                "not a single in-vocabulary token".to_string(),
            ));
        }
    }
    VerbalizerReport { failures }
}

/// Where soft prompt tokens are inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSlot {
    SequenceStart,
    SegmentBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptInit {
    RandomNormal,
    VocabSample,
}

/// Learnable continuous prompt configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftPromptConfig {
    pub tokens_per_slot: usize,
    pub slots: Vec<PromptSlot>,
    pub init: PromptInit,
    pub trainable: bool,
}

impl Default for SoftPromptConfig {
    fn default() -> Self {
        SoftPromptConfig {
            tokens_per_slot: 3,
            slots: vec![PromptSlot::SequenceStart],
            init: PromptInit::RandomNormal,
            trainable: true,
        }
    }
}

impl SoftPromptConfig {
    pub fn total_tokens(&self) -> usize {
        self.tokens_per_slot * self.slots.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tokens_per_slot == 0 {
            return Err("soft_prompt.tokens_per_slot must be >= 1".into());
        }
        if self.slots.is_empty() {
            return Err("soft_prompt.slots must not be empty".into());
        }
        Ok(())
    }
}

/// The byte span a slot's value occupies in the rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub slot: Slot,
    pub start: usize,
    pub end: usize,
}

/// A rendered query: text plus everything a backend needs to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskQuery {
    pub rendered_text: String,
    /// Token position of the mask under the library tokenizer, absent
    /// for maskless (start-task) queries.
    pub mask_index: Option<usize>,
    pub segment_spans: Vec<SegmentSpan>,
    /// Verbalizer tokens to compare at the mask; empty iff no mask.
    pub candidates: Vec<String>,
    pub soft_prompt: Option<SoftPromptConfig>,
    pub task_kind: TaskKind,
}

impl MaskQuery {
    /// The text bound to `slot`, recovered from its span.
    pub fn slot_text(&self, slot: Slot) -> Option<&str> {
        self.segment_spans
            .iter()
            .find(|s| s.slot == slot)
            .map(|s| &self.rendered_text[s.start..s.end])
    }

    pub fn with_soft_prompt(mut self, cfg: Option<SoftPromptConfig>) -> Self {
        self.soft_prompt = cfg;
        self
    }
}

/// A template pattern plus the task it renders queries for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pattern: String,
    task_kind: TaskKind,
}

impl Template {
    pub fn new(pattern: impl Into<String>, task_kind: TaskKind) -> Result<Self, TemplateError> {
        let pattern = pattern.into();
        let expected = match task_kind {
            TaskKind::Inclusive | TaskKind::Temporal => 1,
            TaskKind::Start => 0,
        };
        let found = pattern.matches(MASK_TOKEN).count();
        if found != expected {
            return Err(TemplateError::MaskCount {
                kind: task_kind,
                expected,
                found,
            });
        }
        // reject unknown slot names up front
        for piece in pattern.split('{').skip(1) {
            if let Some(name) = piece.split('}').next() {
                if piece.contains('}') && Slot::from_name(name).is_none() {
                    return Err(TemplateError::UnknownSlot(name.to_string()));
                }
            }
        }
        Ok(Template { pattern, task_kind })
    }

    /// The default surface forms:
    /// inclusive `{main} [MASK] {sub}`, start `{main} start with {sub}`,
    /// temporal `{a} [MASK] {b}`.
    pub fn default_for(kind: TaskKind) -> Template {
        let pattern = match kind {
            TaskKind::Inclusive => "{main} [MASK] {sub}",
            TaskKind::Start => "{main} start with {sub}",
            TaskKind::Temporal => "{a} [MASK] {b}",
        };
        Template::new(pattern, kind).expect("default templates are valid")
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn has_mask(&self) -> bool {
        self.pattern.contains(MASK_TOKEN)
    }

    /// Renders the template with `bindings`, attaching the verbalizer
    /// candidates appropriate for the task.
    pub fn render(
        &self,
        bindings: &Bindings,
        verbalizer: &Verbalizer,
    ) -> Result<MaskQuery, TemplateError> {
        let mut rendered = String::new();
        let mut spans = Vec::new();
        let mut rest = self.pattern.as_str();
        while let Some(open) = rest.find('{') {
            rendered.push_str(&rest[..open]);
            rest = &rest[open + 1..];
            let close = rest.find('}').ok_or_else(|| {
                TemplateError::UnknownSlot(rest.chars().take(16).collect())
            })?;
            let name = &rest[..close];
            let slot = Slot::from_name(name)
                .ok_or_else(|| TemplateError::UnknownSlot(name.to_string()))?;
            let value = bindings
                .get(slot)
                .ok_or(TemplateError::UnboundSlot(slot.name()))?;
            if value.trim().is_empty() {
                return Err(TemplateError::EmptyBinding(slot.name()));
            }
            let start = rendered.len();
            rendered.push_str(value);
            spans.push(SegmentSpan {
                slot,
                start,
                end: rendered.len(),
            });
            rest = &rest[close + 1..];
        }
        rendered.push_str(rest);

        let mask_index = if self.has_mask() {
            let toks = basic_tokenize_spans(&rendered);
            let idx = toks.iter().position(|(t, _)| t == MASK_TOKEN);
            match idx {
                Some(i) => Some(i),
                // a slot value contained "[MASK]" fused into a chunk or
                // a second marker appeared; either way the query is
                // malformed
                None => {
                    return Err(TemplateError::MaskCount {
                        kind: self.task_kind,
                        expected: 1,
                        found: 0,
                    })
                }
            }
        } else {
            None
        };
        if rendered.matches(MASK_TOKEN).count() != usize::from(self.has_mask()) {
            return Err(TemplateError::MaskCount {
                kind: self.task_kind,
                expected: usize::from(self.has_mask()),
                found: rendered.matches(MASK_TOKEN).count(),
            });
        }

        let candidates = match verbalizer.pair(self.task_kind) {
            Some((pos, neg)) if mask_index.is_some() => {
                vec![pos.to_string(), neg.to_string()]
            }
            _ => Vec::new(),
        };
        Ok(MaskQuery {
            rendered_text: rendered,
            mask_index,
            segment_spans: spans,
            candidates,
            soft_prompt: None,
            task_kind: self.task_kind,
        })
    }
}

/// Slot bindings for one render call.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: BTreeMap<Slot, String>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, slot: Slot, value: impl Into<String>) -> Self {
        self.map.insert(slot, value.into());
        self
    }

    pub fn main_sub(main: impl Into<String>, sub: impl Into<String>) -> Self {
        Bindings::new().bind(Slot::Main, main).bind(Slot::Sub, sub)
    }

    pub fn pair(a: impl Into<String>, b: impl Into<String>) -> Self {
        Bindings::new().bind(Slot::A, a).bind(Slot::B, b)
    }

    fn get(&self, slot: Slot) -> Option<&str> {
        self.map.get(&slot).map(|s| s.as_str())
    }
}

/// The full prompt configuration a probe run uses: one template per
/// task, the verbalizer, and the optional soft-prompt layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub inclusive: Template,
    pub start: Template,
    pub temporal: Template,
    pub verbalizer: Verbalizer,
    pub soft_prompt: Option<SoftPromptConfig>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            inclusive: Template::default_for(TaskKind::Inclusive),
            start: Template::default_for(TaskKind::Start),
            temporal: Template::default_for(TaskKind::Temporal),
            verbalizer: Verbalizer::default(),
            soft_prompt: None,
        }
    }
}

impl PromptSet {
    pub fn template(&self, kind: TaskKind) -> &Template {
        match kind {
            TaskKind::Inclusive => &self.inclusive,
            TaskKind::Start => &self.start,
            TaskKind::Temporal => &self.temporal,
        }
    }

    pub fn render(&self, kind: TaskKind, bindings: &Bindings) -> Result<MaskQuery, TemplateError> {
        Ok(self
            .template(kind)
            .render(bindings, &self.verbalizer)?
            .with_soft_prompt(self.soft_prompt.clone()))
    }
}

/// One element of a backend's final input sequence once soft prompts
/// are inserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequencePiece {
    Prompt { slot: PromptSlot, index: usize },
    Token(String),
    Mask,
}

/// Expands a query into its final piece sequence under `cfg`:
/// `SequenceStart` prompts go before token 0, `SegmentBoundary`
/// prompts go right after the first filled slot's last token. Natural
/// token order is preserved.
pub fn soft_prompt_layout(query: &MaskQuery, cfg: &SoftPromptConfig) -> Vec<SequencePiece> {
    let toks = basic_tokenize_spans(&query.rendered_text);
    let boundary_tok = query
        .segment_spans
        .first()
        .map(|span| {
            toks.iter()
                .position(|(_, r)| r.start >= span.end)
                .unwrap_or(toks.len())
        })
        .unwrap_or(0);

    let mut out = Vec::new();
    let prompts_at = |slot: PromptSlot, out: &mut Vec<SequencePiece>| {
        if cfg.slots.contains(&slot) {
            for index in 0..cfg.tokens_per_slot {
                out.push(SequencePiece::Prompt { slot, index });
            }
        }
    };
    prompts_at(PromptSlot::SequenceStart, &mut out);
    for (i, (tok, _)) in toks.iter().enumerate() {
        if i == boundary_tok {
            prompts_at(PromptSlot::SegmentBoundary, &mut out);
        }
        if tok == MASK_TOKEN {
            out.push(SequencePiece::Mask);
        } else {
            out.push(SequencePiece::Token(tok.clone()));
        }
    }
    if boundary_tok == toks.len() {
        prompts_at(PromptSlot::SegmentBoundary, &mut out);
    }
    out
}
