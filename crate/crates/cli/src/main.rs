//! `tlshm`: simulate frame responses, pretrain and transfer SHMnet models,
//! evaluate checkpoints and run whole experiments.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tlshm::arch::{HeadMode, Strategy};

use crate::config::Profile;

#[derive(Parser)]
#[command(name = "tlshm", version, about = "Transfer-learning structural condition identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate impulse responses and write a dataset directory.
    Simulate(SimulateArgs),
    /// Train a network from scratch on a dataset.
    Pretrain(PretrainArgs),
    /// Fine-tune a checkpoint on a target dataset.
    Transfer(TransferArgs),
    /// Score a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Run every transfer arm over several seeds and write a report.
    Experiment(ExperimentArgs),
    /// Print trainable, frozen and total parameter counts.
    Params(ParamsArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// The 37 simulated damage scenarios.
    #[arg(long, conflicts_with = "surrogate_lab")]
    pub table3: bool,
    /// The 11 laboratory-style scenarios on the perturbed frame.
    #[arg(long)]
    pub surrogate_lab: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
}

#[derive(Args)]
pub struct PretrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// shmnet (classes from the data), shmnet11, shmnet37, deepconv or residual.
    #[arg(long, default_value = "shmnet")]
    pub arch: String,
    /// Replicates to train on, e.g. `0-7` or `0,2,4`; all by default.
    #[arg(long)]
    pub replicates: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
}

#[derive(Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Target dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "s1")]
    pub strategy: Strategy,
    #[arg(long, default_value = "head_only")]
    pub head: HeadMode,
    #[arg(long)]
    pub replicates: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub replicates: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 1 (subset to subset) or 2 (simulation to laboratory).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub case: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub task: Option<u8>,
    /// Number of seeds, counting up from `--seed`.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict the arms; repeat for several.
    #[arg(long)]
    pub strategy: Vec<Strategy>,
    /// Existing source dataset instead of generating one.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Existing target dataset instead of generating one.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
}

#[derive(Args)]
pub struct ParamsArgs {
    /// shmnet11, shmnet37, deepconv or residual.
    #[arg(long)]
    pub arch: String,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Class count for deepconv and residual.
    #[arg(long, default_value_t = 11)]
    pub classes: usize,
    #[arg(long, value_enum, default_value_t = Profile::Full)]
    pub profile: Profile,
}

fn init_threads() {
    if let Some(n) = std::env::var("TLSHM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not cap worker threads: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Pretrain(a) => commands::pretrain(&a),
        Command::Transfer(a) => commands::transfer(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Params(a) => commands::params(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
