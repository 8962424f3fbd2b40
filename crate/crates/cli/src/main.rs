//! `betport`: synthetic markets, backtests, tuning and wealth-band reports.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use betport_core::{Family, Preset};
use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfiguration, StrategySpec};

/// Invalid input or configuration; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

impl UsageError {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "betport", version, about = "Betting portfolio backtests")]
struct Cli {
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the simulation protocol and of synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte-Carlo runs per strategy.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Matches settled together per round.
    #[arg(long, global = true)]
    group_size: Option<usize>,
    /// Share of rounds used for training.
    #[arg(long, global = true)]
    train_frac: Option<f64>,
    /// Also write SVG plots of the wealth bands.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Synthetic market preset (horse, basketball, football).
    #[arg(long)]
    preset: Option<Preset>,
    /// Number of synthetic matches.
    #[arg(long)]
    matches: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Match CSV to use instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    data_csv: Option<PathBuf>,
    /// Strategy family with default parameters; repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<Family>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its summary.
    Synth(DataArgs),
    /// Evaluate fixed strategies on the test rounds.
    Backtest(RunArgs),
    /// Tune hyperparameters on the training rounds, then evaluate on test.
    Tune(RunArgs),
    /// Plot bands files (default: all in the output directory).
    Report {
        files: Vec<PathBuf>,
    },
}

fn apply_data(cfg: &mut RunConfiguration, data: &DataArgs) {
    if let Some(p) = data.preset {
        cfg.dataset.preset = Some(p);
        cfg.dataset.csv = None;
    }
    if let Some(m) = data.matches {
        cfg.dataset.matches = Some(m);
    }
}

fn apply_run(cfg: &mut RunConfiguration, args: &RunArgs) {
    apply_data(cfg, &args.data);
    if let Some(path) = &args.data_csv {
        cfg.dataset.csv = Some(path.clone());
        cfg.dataset.preset = None;
    }
    if !args.strategies.is_empty() {
        cfg.strategies = args.strategies.iter().copied().map(StrategySpec::family).collect();
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfiguration::read(path)?,
        None => RunConfiguration::default(),
    };
    match &cli.command {
        Command::Synth(d) => apply_data(&mut cfg, d),
        Command::Backtest(a) | Command::Tune(a) => apply_run(&mut cfg, a),
        Command::Report { .. } => {}
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        runs: cli.runs,
        group_size: cli.group_size,
        train_frac: cli.train_frac,
        plots: cli.plots,
    };
    let resolved = cfg.resolve(&overrides)?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&resolved),
        Command::Backtest(_) => commands::backtest(&resolved),
        Command::Tune(_) => commands::tune(&resolved),
        Command::Report { files } => commands::report(&resolved, files),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
