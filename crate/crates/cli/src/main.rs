//! `regen-rates`: configuration-driven experiments on regenerative CLT rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "regen-rates", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest blocks; writes blocks.csv and estimates.json.
    Simulate(Common),
    /// Distance sweep over n; writes rates.csv and fit.json.
    Rates(Common),
    /// Semi-local limit discrepancies; writes llt.csv.
    Llt(Common),
    /// Walk-in-random-environment analytics; writes analytics.json.
    Rwre(Common),
    /// Exact mixing coefficients; writes mixing.csv and mixing.json.
    Mixing(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "REGEN_RATES_THREADS")]
    threads: Option<usize>,
}

type Handler = fn(&ExperimentConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Rates(c) => (c, commands::rates),
        Command::Llt(c) => (c, commands::llt),
        Command::Rwre(c) => (c, commands::rwre),
        Command::Mixing(c) => (c, commands::mixing),
    };
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    commands::ensure_dir(&out)?;
    cmd(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
