//! The declarative run configuration (TOML). One file drives every
//! command; flags only override config keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scriptprobe::corpus::{SplitSpec, TemporalMode};
use scriptprobe::evaluation::Granularity;
use scriptprobe::prompting::{
    PromptSet, RelationLabel, SoftPromptConfig, TaskKind, Template, Verbalizer,
};
use scriptprobe::scorer::{Hyperparams, LossMode, TrainingRegime};

use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; mandatory for reproducibility.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    pub split: SplitSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub templates: TemplatesSection,
    #[serde(default)]
    pub verbalizers: VerbalizersSection,
    pub backend: BackendSection,
    #[serde(default)]
    pub soft_prompt: Option<SoftPromptSection>,
    #[serde(default)]
    pub training: TrainingSection,
    /// Which probing tasks the probe/train commands cover.
    #[serde(default = "default_tasks")]
    pub tasks: Vec<TaskKind>,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

fn default_tasks() -> Vec<TaskKind> {
    vec![TaskKind::Inclusive, TaskKind::Start, TaskKind::Temporal]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_eval: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub negative_multiplier: usize,
    pub temporal_mode: TemporalMode,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            negative_multiplier: 100,
            temporal_mode: TemporalMode::SampleOne,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplatesSection {
    pub inclusive: Option<String>,
    pub start: Option<String>,
    pub temporal: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerbalizersSection {
    pub inclusive: Option<String>,
    pub exclusive: Option<String>,
    pub before: Option<String>,
    pub after: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Tiny,
    External,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Backend init seed; defaults to the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Mock only: answer consistently with the gold eval split.
    #[serde(default)]
    pub consistent_with_eval: bool,
    /// Tiny only.
    #[serde(default)]
    pub buckets: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub loss: Option<LossMode>,
    /// External only: the bridge command line.
    #[serde(default)]
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftPromptSection {
    pub tokens_per_slot: usize,
    pub slots: Vec<scriptprobe::prompting::PromptSlot>,
    pub init: scriptprobe::prompting::PromptInit,
    pub trainable: bool,
}

impl Default for SoftPromptSection {
    fn default() -> Self {
        let d = SoftPromptConfig::default();
        SoftPromptSection {
            tokens_per_slot: d.tokens_per_slot,
            slots: d.slots,
            init: d.init,
            trainable: d.trainable,
        }
    }
}

impl SoftPromptSection {
    pub fn to_config(&self) -> SoftPromptConfig {
        SoftPromptConfig {
            tokens_per_slot: self.tokens_per_slot,
            slots: self.slots.clone(),
            init: self.init,
            trainable: self.trainable,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub regime: TrainingRegime,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub margin: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            regime: TrainingRegime::Pretrained,
            learning_rate: None,
            epochs: None,
            batch_size: None,
            margin: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub granularity: Granularity,
    pub html: bool,
    /// Row label in reports; defaults to "<kind>-<regime>".
    pub method_name: Option<String>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            granularity: Granularity::Event,
            html: false,
            method_name: None,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file. Validation failures name
    /// the offending field path.
    pub fn load(path: &Path) -> CliResult<(Self, String)> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("config file {}: {e}", path.display()))
        })?;
        let config: RunConfig = toml::from_str(&raw)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok((config, raw))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !self.corpus.path.exists() {
            return Err(CliError::validation(format!(
                "corpus.path: file not found: {}",
                self.corpus.path.display()
            )));
        }
        if self.sampling.negative_multiplier == 0 {
            return Err(CliError::validation(
                "sampling.negative_multiplier: must be >= 1",
            ));
        }
        if let Some(sp) = &self.soft_prompt {
            sp.to_config()
                .validate()
                .map_err(CliError::validation)?;
        }
        if self.backend.kind == BackendKind::External && self.backend.command.is_none() {
            return Err(CliError::validation(
                "backend.command: required when backend.kind = \"external\"",
            ));
        }
        if self.tasks.is_empty() {
            return Err(CliError::validation("tasks: must not be empty"));
        }
        // template surface errors should fail at validation, not mid-run
        self.prompt_set().map(|_| ())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            n_train: self.split.n_train,
            n_dev: self.split.n_dev,
            n_eval: self.split.n_eval,
            seed: self.seed,
        }
    }

    pub fn verbalizer(&self) -> Verbalizer {
        let mut v = Verbalizer::default();
        let overrides = [
            (RelationLabel::Inclusive, &self.verbalizers.inclusive),
            (RelationLabel::Exclusive, &self.verbalizers.exclusive),
            (RelationLabel::Before, &self.verbalizers.before),
            (RelationLabel::After, &self.verbalizers.after),
        ];
        for (label, tok) in overrides {
            if let Some(t) = tok {
                v = v.with(label, t.clone());
            }
        }
        v
    }

    /// The prompt set every command shares: configured templates (or
    /// defaults), verbalizer overrides, and the soft-prompt layout
    /// when the regime uses one.
    pub fn prompt_set(&self) -> CliResult<PromptSet> {
        let template = |kind: TaskKind, pattern: &Option<String>| -> CliResult<Template> {
            match pattern {
                Some(p) => Template::new(p.clone(), kind).map_err(|e| {
                    CliError::validation(format!("templates.{:?}: {e}", kind).to_lowercase())
                }),
                None => Ok(Template::default_for(kind)),
            }
        };
        let soft_prompt = if self.training.regime.uses_soft_prompts() {
            Some(
                self.soft_prompt
                    .clone()
                    .unwrap_or_default()
                    .to_config(),
            )
        } else {
            None
        };
        Ok(PromptSet {
            inclusive: template(TaskKind::Inclusive, &self.templates.inclusive)?,
            start: template(TaskKind::Start, &self.templates.start)?,
            temporal: template(TaskKind::Temporal, &self.templates.temporal)?,
            verbalizer: self.verbalizer(),
            soft_prompt,
        })
    }

    pub fn hyperparams(&self) -> CliResult<Hyperparams> {
        let defaults = Hyperparams::defaults_for(self.training.regime);
        let hp = Hyperparams {
            learning_rate: self.training.learning_rate.unwrap_or(defaults.learning_rate),
            epochs: self.training.epochs.unwrap_or(defaults.epochs),
            batch_size: self.training.batch_size.unwrap_or(defaults.batch_size),
            margin: self.training.margin.unwrap_or(defaults.margin),
            seed: self.seed,
        };
        hp.validate()
            .map_err(|e| CliError::validation(format!("training: {e}")))?;
        Ok(hp)
    }

    pub fn backend_seed(&self) -> u64 {
        self.backend.seed.unwrap_or(self.seed)
    }

    pub fn method_name(&self) -> String {
        self.evaluation.method_name.clone().unwrap_or_else(|| {
            let kind = match self.backend.kind {
                BackendKind::Mock => "mock",
                BackendKind::Tiny => "tiny",
                BackendKind::External => "external",
            };
            let regime = match self.training.regime {
                TrainingRegime::Pretrained => "pretrained",
                TrainingRegime::Finetune => "finetune",
                TrainingRegime::Ptuning => "ptuning",
                TrainingRegime::PtuningFreeze => "ptuning-freeze",
            };
            format!("{kind}-{regime}")
        })
    }
}
