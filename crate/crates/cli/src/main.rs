//! `scriptprobe` — probe masked-LM script knowledge and induce scripts
//! end to end from one declarative run configuration.

mod commands;
mod config;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scriptprobe::prompting::TaskKind;
use scriptprobe::scorer::TrainingRegime;

use commands::Ctx;
use config::RunConfig;
use errors::CliResult;

#[derive(Parser)]
#[command(
    name = "scriptprobe",
    version,
    about = "Script-knowledge probing and induction over masked-LM scorers"
)]
struct Cli {
    /// Path to the run configuration (TOML).
    #[arg(short, long, global = true, default_value = "scriptprobe.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TaskArg {
    Inclusive,
    Start,
    Temporal,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> TaskKind {
        match t {
            TaskArg::Inclusive => TaskKind::Inclusive,
            TaskArg::Start => TaskKind::Start,
            TaskArg::Temporal => TaskKind::Temporal,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RegimeArg {
    Pretrained,
    Finetune,
    Ptuning,
    PtuningFreeze,
}

impl From<RegimeArg> for TrainingRegime {
    fn from(r: RegimeArg) -> TrainingRegime {
        match r {
            RegimeArg::Pretrained => TrainingRegime::Pretrained,
            RegimeArg::Finetune => TrainingRegime::Finetune,
            RegimeArg::Ptuning => TrainingRegime::Ptuning,
            RegimeArg::PtuningFreeze => TrainingRegime::PtuningFreeze,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split the corpus and synthesize per-task samples.
    Prepare,
    /// Fit the trainable backend on one task's samples.
    Train {
        /// Which task head to train.
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Override the configured training regime.
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
    },
    /// Run the probing tasks and write per-task decision files.
    Probe,
    /// Induce a script for every evaluation scenario.
    Induce,
    /// Evaluate the configured backend and write the report.
    Eval,
    /// Re-render stored evaluation results.
    Report {
        /// Append the published reference rows for comparison.
        #[arg(long)]
        reference: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let (config, raw_config) = RunConfig::load(&cli.config)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let ctx = Ctx {
        config,
        raw_config,
        config_path: cli.config.clone(),
    };
    match cli.command {
        Command::Prepare => commands::cmd_prepare(&ctx),
        Command::Train { task, regime } => {
            commands::cmd_train(&ctx, task.into(), regime.map(Into::into))
        }
        Command::Probe => commands::cmd_probe(&ctx),
        Command::Induce => commands::cmd_induce(&ctx),
        Command::Eval => commands::cmd_eval(&ctx),
        Command::Report { reference } => commands::cmd_report(&ctx, reference),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
