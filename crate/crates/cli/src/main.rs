//! `gduplan` — plan planting days so weekly harvests stay consistent.
//!
//! Subcommands chain into a pipeline:
//!
//! ```text
//! synth → forecast train → scenarios generate → schedule → evaluate
//! ```
//!
//! Every run writes its artifacts plus a `manifest.json` (inputs, digests,
//! seeds, resolved parameters, versions) into `--out`, and never modifies
//! its input files. Exit codes: 0 success, 2 validation error, 3 infeasible
//! instance, 4 search budget exhausted.

mod commands;
mod config;
mod manifest;
mod runio;
mod svg;

use clap::{Parser, Subcommand};
use gduplan::ErrorCategory;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "gduplan",
    version,
    about = "Schedule planting days for year-round seed production",
    propagate_version = true,
    args_override_self = true
)]
pub struct Cli {
    /// Directory receiving all output artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Master RNG seed; echoed into the run manifest.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file whose keys override command-line flags. Top-level keys
    /// set global flags; a table named after the subcommand (nested for
    /// `forecast train` etc.) sets that subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic GDU history and population list.
    Synth(commands::synth::SynthArgs),
    /// Train or cross-validate the GDU forecaster.
    Forecast {
        #[command(subcommand)]
        action: commands::forecast::ForecastAction,
    },
    /// Produce Monte Carlo GDU scenarios from a trained model.
    Scenarios {
        #[command(subcommand)]
        action: commands::scenarios::ScenariosAction,
    },
    /// Solve a planting-schedule optimization problem.
    Schedule(commands::schedule::ScheduleArgs),
    /// Score an existing schedule against a scenario set.
    Evaluate(commands::evaluate::EvaluateArgs),
}

impl Command {
    /// Name path used for config-file sections and the manifest.
    fn name_path(&self) -> Vec<&'static str> {
        match self {
            Command::Synth(_) => vec!["synth"],
            Command::Forecast { action } => match action {
                commands::forecast::ForecastAction::Train(_) => vec!["forecast", "train"],
                commands::forecast::ForecastAction::Eval(_) => vec!["forecast", "eval"],
            },
            Command::Scenarios { action } => match action {
                commands::scenarios::ScenariosAction::Generate(_) => vec!["scenarios", "generate"],
            },
            Command::Schedule(_) => vec!["schedule"],
            Command::Evaluate(_) => vec!["evaluate"],
        }
    }
}

fn run(argv: Vec<String>) -> gduplan::Result<()> {
    let cli = Cli::parse_from(&argv);
    let cli = match &cli.config {
        Some(path) => {
            let argv = config::with_overrides(argv, path, &cli.command.name_path())?;
            Cli::parse_from(&argv)
        }
        None => cli,
    };

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| gduplan::Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    runio::create_dir(&cli.out)?;

    match &cli.command {
        Command::Synth(args) => commands::synth::run(&cli, args),
        Command::Forecast { action } => commands::forecast::run(&cli, action),
        Command::Scenarios { action } => commands::scenarios::run(&cli, action),
        Command::Schedule(args) => commands::schedule::run(&cli, args),
        Command::Evaluate(args) => commands::evaluate::run(&cli, args),
    }
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Infeasible => 3,
                ErrorCategory::Budget => 4,
            };
            std::process::exit(code);
        }
    }
}
