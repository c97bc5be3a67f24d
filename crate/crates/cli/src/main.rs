//! `grv`: train robust graph encoders, attack them, evaluate them downstream
//! and check the vulnerability/risk relations on synthetic models.

// negated comparisons in config validation are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grv_core::pipeline::AttackKind;

use crate::commands::{Precomputed, Run};
use crate::config::{Overrides, Phase, RunConfig, Task};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "grv", version, about = "Robust unsupervised graph representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Flip budget as a fraction of the edge count.
    #[arg(long)]
    budget_frac: Option<f64>,
    /// L-infinity budget on attributes.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Downstream task(s), comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_task)]
    task: Option<Vec<Task>>,
    #[arg(long, value_parser = parse_attack)]
    attack: Option<AttackKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an encoder and write a checkpoint, a log and a summary.
    Train(Common),
    /// Perturb the dataset against a trained encoder.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score downstream tasks over seeded trials.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate on this already perturbed edge list instead of attacking.
        #[arg(long)]
        perturbed: Option<PathBuf>,
        #[arg(long, requires = "perturbed")]
        perturbed_attributes: Option<PathBuf>,
    },
    /// Check the vulnerability/gap relations and the risk lower bound.
    Theory {
        #[command(flatten)]
        common: Common,
        /// Also evaluate the risk bound for this encoder on the dataset.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    match s {
        "mi-pgd" | "degree" | "betw" | "eigen" => s.parse().map_err(|e: grv_core::Error| e.to_string()),
        other => Err(format!("unknown attack {other:?} (expected mi-pgd, degree, betw or eigen)")),
    }
}

fn prepare(common: &Common, phase: Phase) -> CliResult<Run> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    let overrides = Overrides {
        seed: common.seed,
        budget_frac: common.budget_frac,
        epsilon: common.epsilon,
        tasks: common.task.clone(),
        attack: common.attack,
    };
    config.apply(&overrides, phase)?;
    Run::new(config, common.out.clone())
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train(common) => commands::cmd_train(&prepare(&common, Phase::Train)?),
        Command::Attack { common, checkpoint } => commands::cmd_attack(&prepare(&common, Phase::Evaluate)?, &checkpoint),
        Command::Eval {
            common,
            checkpoint,
            perturbed,
            perturbed_attributes,
        } => {
            let pre = perturbed.as_deref().map(|edges| Precomputed {
                edges,
                attributes: perturbed_attributes.as_deref(),
            });
            commands::cmd_eval(&prepare(&common, Phase::Evaluate)?, &checkpoint, pre)
        }
        Command::Theory { common, checkpoint } => {
            if commands::cmd_theory(&prepare(&common, Phase::Evaluate)?, checkpoint.as_deref())? {
                Ok(())
            } else {
                Err(CliError::Tolerance("at least one theory check failed, see the report".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
