//! The pipeline commands: prepare, train, probe, induce, eval, report.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use scriptprobe::corpus::{
    build_candidate_pool, build_inclusive_samples, build_start_samples, build_temporal_samples,
    load_corpus, split_corpus, ScriptCorpus, SubEvent,
};
use scriptprobe::evaluation::{reference_report, run_report, TaskReport};
use scriptprobe::induction::induce_script;
use scriptprobe::prompting::TaskKind;
use scriptprobe::scorer::{
    ExternalLm, ExternalLmConfig, MockBackend, ScorerBackend, TaskDataset, TinyLm, TinyLmConfig,
    TrainingRegime,
};
use scriptprobe::tasks::Prober;

use crate::config::{BackendKind, RunConfig};
use crate::errors::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Cache directory env var forwarded to external model backends.
pub const CACHE_DIR_ENV: &str = "SCRIPTPROBE_CACHE_DIR";

pub struct Ctx {
    pub config: RunConfig,
    pub raw_config: String,
    pub config_path: PathBuf,
}

impl Ctx {
    fn out(&self) -> &Path {
        &self.config.output_dir
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::load_or_new(self.out(), &self.config_path, &self.raw_config)
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(anyhow::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let raw = std::fs::read_to_string(path)?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Runtime(e.into())))
        .collect()
}

/// prepare: split the corpus, synthesize per-task samples, and write
/// the candidate pool. Idempotent for a fixed config and seed.
pub fn cmd_prepare(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.config;
    std::fs::create_dir_all(ctx.out().join("splits"))?;
    std::fs::create_dir_all(ctx.out().join("samples"))?;

    let corpus = load_corpus(&cfg.corpus.path).map_err(|e| {
        CliError::validation(format!("corpus.path: {e}"))
    })?;
    let spec = cfg.split_spec();
    let (train, dev, eval) = split_corpus(&corpus, &spec)
        .map_err(|e| CliError::validation(format!("split: {e}")))?;

    let mut manifest = ctx.manifest();
    for (name, part) in [("train", &train), ("dev", &dev), ("eval", &eval)] {
        let rel = format!("splits/{name}.jsonl");
        part.save(ctx.out().join(&rel)).map_err(anyhow::Error::from)?;
        manifest.record(&format!("splits.{name}"), rel);
    }
    let split_manifest = serde_json::json!({
        "seed": spec.seed,
        "sizes": [spec.n_train, spec.n_dev, spec.n_eval],
        "eval_reduction": "longest",
    });
    std::fs::write(
        ctx.out().join("splits/split_manifest.json"),
        serde_json::to_string_pretty(&split_manifest).expect("serializes"),
    )?;
    manifest.record("splits.manifest", "splits/split_manifest.json");

    let inclusive = build_inclusive_samples(&train, cfg.sampling.negative_multiplier, cfg.seed)
        .map_err(anyhow::Error::from)?;
    write_jsonl(&ctx.out().join("samples/inclusive.jsonl"), &inclusive)?;
    manifest.record("samples.inclusive", "samples/inclusive.jsonl");

    let start = build_start_samples(&train);
    if start.skipped_single_event > 0 {
        log::info!(
            "skipped {} single-event script(s) while building start groups",
            start.skipped_single_event
        );
    }
    write_jsonl(&ctx.out().join("samples/start_groups.jsonl"), &start.groups)?;
    manifest.record("samples.start", "samples/start_groups.jsonl");

    let temporal = build_temporal_samples(&train, cfg.sampling.temporal_mode, cfg.seed);
    write_jsonl(&ctx.out().join("samples/temporal.jsonl"), &temporal)?;
    manifest.record("samples.temporal", "samples/temporal.jsonl");

    let pool = build_candidate_pool(&eval);
    let pool_rows: Vec<serde_json::Value> = pool
        .iter()
        .map(|e| serde_json::json!({ "text": e.text() }))
        .collect();
    write_jsonl(&ctx.out().join("samples/candidate_pool.jsonl"), &pool_rows)?;
    manifest.record("samples.pool", "samples/candidate_pool.jsonl");

    manifest.save(ctx.out())?;
    println!(
        "prepared splits {}/{}/{} ({} inclusive, {} start, {} temporal samples; pool {})",
        train.len(),
        dev.len(),
        eval.len(),
        inclusive.len(),
        start.groups.len(),
        temporal.len(),
        pool.len()
    );
    Ok(())
}

fn checkpoint_rel(task: TaskKind, regime: TrainingRegime) -> String {
    format!("checkpoints/{}_{}.ckpt.json", task_slug(task), regime_slug(regime))
}

fn task_slug(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Inclusive => "inclusive",
        TaskKind::Start => "start",
        TaskKind::Temporal => "temporal",
    }
}

fn regime_slug(regime: TrainingRegime) -> &'static str {
    match regime {
        TrainingRegime::Pretrained => "pretrained",
        TrainingRegime::Finetune => "finetune",
        TrainingRegime::Ptuning => "ptuning",
        TrainingRegime::PtuningFreeze => "ptuning_freeze",
    }
}

fn tiny_config(cfg: &RunConfig, with_prompts: bool) -> TinyLmConfig {
    let defaults = TinyLmConfig::default();
    TinyLmConfig {
        buckets: cfg.backend.buckets.unwrap_or(defaults.buckets),
        dim: cfg.backend.dim.unwrap_or(defaults.dim),
        seed: cfg.backend_seed(),
        soft_prompt: if with_prompts {
            Some(cfg.soft_prompt.clone().unwrap_or_default().to_config())
        } else {
            None
        },
        loss: cfg.backend.loss.unwrap_or(defaults.loss),
    }
}

fn load_task_dataset(ctx: &Ctx, task: TaskKind) -> CliResult<TaskDataset> {
    let manifest = ctx.manifest();
    let name = match task {
        TaskKind::Inclusive => "samples.inclusive",
        TaskKind::Start => "samples.start",
        TaskKind::Temporal => "samples.temporal",
    };
    let path = manifest.require(ctx.out(), name, "prepare")?;
    Ok(match task {
        TaskKind::Inclusive => TaskDataset::Inclusive(read_jsonl(&path)?),
        TaskKind::Start => TaskDataset::Start(read_jsonl(&path)?),
        TaskKind::Temporal => TaskDataset::Temporal(read_jsonl(&path)?),
    })
}

/// train: fit the trainable backend on one task's prepared samples and
/// write the checkpoint plus the per-epoch loss log.
pub fn cmd_train(ctx: &Ctx, task: TaskKind, regime_override: Option<TrainingRegime>) -> CliResult<()> {
    let cfg = &ctx.config;
    let regime = regime_override.unwrap_or(cfg.training.regime);
    if regime == TrainingRegime::Pretrained {
        return Err(CliError::validation(
            "training.regime: Pretrained performs no updates; use `scriptprobe probe` instead",
        ));
    }
    if cfg.backend.kind != BackendKind::Tiny {
        return Err(CliError::validation(
            "backend.kind: only the \"tiny\" backend is trainable; mock and external are scoring-only",
        ));
    }

    let data = load_task_dataset(ctx, task)?;
    let mut prompts = cfg.prompt_set()?;
    if regime.uses_soft_prompts() {
        prompts.soft_prompt = Some(cfg.soft_prompt.clone().unwrap_or_default().to_config());
    }
    let hp = cfg.hyperparams()?;
    let mut lm = TinyLm::new(tiny_config(cfg, regime.uses_soft_prompts()));
    let log = lm
        .fit(&prompts, &data, regime, &hp)
        .map_err(|e| CliError::Runtime(e.into()))?;

    std::fs::create_dir_all(ctx.out().join("checkpoints"))?;
    let ckpt_rel = checkpoint_rel(task, regime);
    lm.save(ctx.out().join(&ckpt_rel), regime)
        .map_err(anyhow::Error::from)?;
    let log_rel = format!(
        "checkpoints/{}_{}.log.jsonl",
        task_slug(task),
        regime_slug(regime)
    );
    std::fs::write(ctx.out().join(&log_rel), log.to_jsonl())?;

    let mut manifest = ctx.manifest();
    manifest.record(&format!("checkpoints.{}.{}", task_slug(task), regime_slug(regime)), ckpt_rel);
    manifest.record(
        &format!("logs.{}.{}", task_slug(task), regime_slug(regime)),
        log_rel,
    );
    manifest.save(ctx.out())?;
    println!(
        "trained {} under {:?}: loss {:.4} -> {:.4} over {} epochs",
        task_slug(task),
        regime,
        log.first_loss().unwrap_or(f64::NAN),
        log.final_loss().unwrap_or(f64::NAN),
        log.records.len()
    );
    Ok(())
}

/// Builds the per-task prober for probe/induce/eval. Tiny backends
/// pick up per-task checkpoints for the configured regime when they
/// exist; otherwise the seeded initial state is used.
fn build_prober(ctx: &Ctx, eval: &ScriptCorpus) -> CliResult<Prober> {
    let cfg = &ctx.config;
    let prompts = cfg.prompt_set()?;
    match cfg.backend.kind {
        BackendKind::Mock => {
            let backend: Arc<dyn ScorerBackend> = if cfg.backend.consistent_with_eval {
                Arc::new(MockBackend::consistent_with(eval, cfg.backend_seed()))
            } else {
                Arc::new(MockBackend::new(cfg.backend_seed()))
            };
            Ok(Prober::new(backend, prompts))
        }
        BackendKind::External => {
            let command = cfg.backend.command.clone().expect("validated");
            let backend = ExternalLm::start(&ExternalLmConfig {
                command,
                cache_dir: std::env::var(CACHE_DIR_ENV).ok(),
            })
            .map_err(|e| CliError::Runtime(e.into()))?;
            log::info!("external backend ready: {}", backend.model());
            Ok(Prober::new(Arc::new(backend), prompts))
        }
        BackendKind::Tiny => {
            let regime = cfg.training.regime;
            let backend_for = |task: TaskKind| -> CliResult<Arc<dyn ScorerBackend>> {
                let ckpt = ctx.out().join(checkpoint_rel(task, regime));
                if regime != TrainingRegime::Pretrained && ckpt.exists() {
                    log::info!("loading checkpoint {}", ckpt.display());
                    Ok(Arc::new(
                        TinyLm::load(&ckpt).map_err(|e| CliError::Runtime(e.into()))?,
                    ))
                } else {
                    Ok(Arc::new(TinyLm::new(tiny_config(
                        cfg,
                        regime.uses_soft_prompts(),
                    ))))
                }
            };
            Ok(Prober::per_task(
                backend_for(TaskKind::Inclusive)?,
                backend_for(TaskKind::Start)?,
                backend_for(TaskKind::Temporal)?,
                prompts,
            ))
        }
    }
}

fn load_eval_split(ctx: &Ctx) -> CliResult<ScriptCorpus> {
    let manifest = ctx.manifest();
    let path = manifest.require(ctx.out(), "splits.eval", "prepare")?;
    load_corpus(&path).map_err(|e| CliError::Runtime(e.into()))
}

fn load_pool(ctx: &Ctx) -> CliResult<Vec<SubEvent>> {
    let manifest = ctx.manifest();
    let path = manifest.require(ctx.out(), "samples.pool", "prepare")?;
    let rows: Vec<serde_json::Value> = read_jsonl(&path)?;
    rows.iter()
        .map(|v| {
            let text = v["text"]
                .as_str()
                .ok_or_else(|| CliError::Runtime(anyhow::anyhow!("pool row missing text")))?;
            SubEvent::new(text).map_err(|e| CliError::Runtime(e.into()))
        })
        .collect()
}

/// probe: run the selected tasks over the evaluation split and write
/// one decision file per task ({task, inputs, margin, label} rows).
pub fn cmd_probe(ctx: &Ctx) -> CliResult<()> {
    let eval = load_eval_split(ctx)?;
    let pool = load_pool(ctx)?;
    let prober = build_prober(ctx, &eval)?;
    std::fs::create_dir_all(ctx.out().join("decisions"))?;
    let mut manifest = ctx.manifest();

    for task in ctx.config.tasks.clone() {
        let mut rows: Vec<serde_json::Value> = Vec::new();
        match task {
            TaskKind::Inclusive => {
                for scenario in eval.scenarios() {
                    for d in prober.inclusive_decisions(&scenario.main_event, &pool)? {
                        rows.push(serde_json::json!({
                            "task": "inclusive",
                            "inputs": {
                                "main_event": d.main_event,
                                "sub_event": d.sub_event.text(),
                            },
                            "margin": d.margin,
                            "label": d.label,
                        }));
                    }
                }
            }
            TaskKind::Start => {
                for scenario in eval.scenarios() {
                    let gold = scenario.scripts[0].events();
                    let scores = prober.start_scores(&scenario.main_event, gold)?;
                    let selected = prober.select_start(&scenario.main_event, gold)?;
                    for s in scores {
                        rows.push(serde_json::json!({
                            "task": "start",
                            "inputs": {
                                "main_event": scenario.main_event,
                                "sub_event": s.sub_event.text(),
                            },
                            "margin": s.score,
                            "label": if s.sub_event == selected { "Selected" } else { "Candidate" },
                        }));
                    }
                }
            }
            TaskKind::Temporal => {
                for scenario in eval.scenarios() {
                    let gold = scenario.scripts[0].events();
                    for i in 0..gold.len() {
                        for j in i + 1..gold.len() {
                            let d = prober.predict_relation(&gold[i], &gold[j])?;
                            rows.push(serde_json::json!({
                                "task": "temporal",
                                "inputs": {
                                    "event_a": d.event_a.text(),
                                    "event_b": d.event_b.text(),
                                },
                                "margin": d.margin,
                                "label": d.relation,
                            }));
                        }
                    }
                }
            }
        }
        let rel = format!("decisions/{}.jsonl", task_slug(task));
        write_jsonl(&ctx.out().join(&rel), &rows)?;
        manifest.record(&format!("decisions.{}", task_slug(task)), rel);
        println!("probed {}: {} decisions", task_slug(task), rows.len());
    }
    manifest.save(ctx.out())?;
    Ok(())
}

/// induce: run the full pipeline for every evaluation scenario and
/// write the induced scripts with full provenance.
pub fn cmd_induce(ctx: &Ctx) -> CliResult<()> {
    let eval = load_eval_split(ctx)?;
    let pool = load_pool(ctx)?;
    let prober = build_prober(ctx, &eval)?;
    std::fs::create_dir_all(ctx.out().join("induced"))?;

    let mut induced = Vec::with_capacity(eval.len());
    for scenario in eval.scenarios() {
        induced.push(induce_script(&prober, &scenario.main_event, &pool)?);
    }
    let degenerate = induced.iter().filter(|s| s.degenerate).count();
    write_jsonl(&ctx.out().join("induced/scripts.jsonl"), &induced)?;

    let mut manifest = ctx.manifest();
    manifest.record("induced.scripts", "induced/scripts.jsonl");
    manifest.save(ctx.out())?;
    println!(
        "induced {} scripts ({} degenerate)",
        induced.len(),
        degenerate
    );
    Ok(())
}

/// eval: compute the full report for the configured backend and write
/// the text tables, the JSONL rows, and optionally the HTML summary.
pub fn cmd_eval(ctx: &Ctx) -> CliResult<()> {
    let eval = load_eval_split(ctx)?;
    let prober = build_prober(ctx, &eval)?;
    let method = ctx.config.method_name();
    let report = run_report(
        &eval,
        &[(method.as_str(), &prober)],
        ctx.config.evaluation.granularity,
    )
    .map_err(|e| CliError::Runtime(e.into()))?;
    write_report(ctx, &report)?;
    print!("{}", report.render_overall());
    Ok(())
}

fn write_report(ctx: &Ctx, report: &TaskReport) -> CliResult<()> {
    std::fs::create_dir_all(ctx.out().join("reports"))?;
    let mut manifest = ctx.manifest();
    std::fs::write(ctx.out().join("reports/report.jsonl"), report.to_jsonl())?;
    manifest.record("reports.rows", "reports/report.jsonl");
    manifest.save(ctx.out())?;
    write_rendered(ctx, report)
}

/// Writes the rendered views only; `reports/report.jsonl` stays the
/// run's own rows so re-rendering never stacks reference rows into it.
fn write_rendered(ctx: &Ctx, report: &TaskReport) -> CliResult<()> {
    std::fs::create_dir_all(ctx.out().join("reports"))?;
    let mut manifest = ctx.manifest();
    std::fs::write(
        ctx.out().join("reports/report_overall.txt"),
        report.render_overall(),
    )?;
    manifest.record("reports.overall", "reports/report_overall.txt");
    std::fs::write(ctx.out().join("reports/report_tasks.txt"), report.render_tasks())?;
    manifest.record("reports.tasks", "reports/report_tasks.txt");
    if ctx.config.evaluation.html {
        std::fs::write(
            ctx.out().join("reports/report.html"),
            report.to_html("script probing report"),
        )?;
        manifest.record("reports.html", "reports/report.html");
    }
    manifest.save(ctx.out())?;
    Ok(())
}

/// report: re-render the stored evaluation rows, optionally with the
/// published reference rows appended for side-by-side comparison.
pub fn cmd_report(ctx: &Ctx, with_reference: bool) -> CliResult<()> {
    let manifest = ctx.manifest();
    let rows_path = manifest.require(ctx.out(), "reports.rows", "eval")?;
    let rows: Vec<scriptprobe::evaluation::ReportRow> = read_jsonl(&rows_path)?;
    let mut report = TaskReport {
        granularity: ctx.config.evaluation.granularity,
        rows,
    };
    if with_reference {
        report.rows.extend(reference_report().rows);
    }
    write_rendered(ctx, &report)?;
    println!("{}", report.render_overall());
    println!("{}", report.render_tasks());
    Ok(())
}
