//! `flowcast` — command-line pipeline for event-aware visitor flow
//! forecasting.
//!
//! Exit codes: 0 on success, 1 on domain errors (model, gateway, data
//! semantics), 2 on configuration or I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "flowcast", version, about = "Event-aware visitor flow forecasting pipeline")]
struct Cli {
    /// Path to the run configuration file.
    #[arg(long, global = true, default_value = "flowcast.toml")]
    config: PathBuf,
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repeat for more logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Emit machine-readable JSON on stdout for report commands.
    #[arg(long, global = true, value_parser = ["text", "json"], default_value = "text")]
    format: String,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic corpus files.
    Synth {
        /// Override the number of days.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Structure raw events into sessions, summaries, and types.
    Structure {
        /// Confirm remote-gateway usage without prompting.
        #[arg(long)]
        yes: bool,
    },
    /// Label every (event, post) pair as related or not.
    Relevance {
        #[arg(long)]
        yes: bool,
    },
    /// Compute per-event popularity metrics.
    Popularity {
        /// Ignore posts created at or after this time (RFC 3339, local).
        #[arg(long)]
        cutoff: Option<chrono::NaiveDateTime>,
    },
    /// Assemble feature matrices.
    Features {
        /// Feature set to build (default from config).
        #[arg(long)]
        set: Option<String>,
        /// Build all five feature sets.
        #[arg(long)]
        all: bool,
    },
    /// Fit the configured model on a feature matrix and save it.
    Train {
        #[arg(long)]
        set: Option<String>,
    },
    /// Expanding-window rolling prediction.
    Rolling {
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Flow segment (entry point) to forecast.
        #[arg(long)]
        segment: Option<String>,
    },
    /// Hyperparameter grid search with a one-day horizon.
    Gridsearch {
        #[arg(long)]
        first_origin: Option<usize>,
    },
    /// Compare all five feature sets under the configured model.
    Ablation {
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Attribute a trained model's predictions to features.
    Explain {
        #[arg(long)]
        top_k: Option<usize>,
        /// Also run permutation importance as a cross-check.
        #[arg(long)]
        permutation: bool,
    },
}

/// Errors mapped to exit codes.
pub enum CliError {
    /// Exit 1: the pipeline itself failed.
    Domain(String),
    /// Exit 2: bad configuration or I/O.
    Config(String),
}

impl CliError {
    fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<flowcast::io::IoError> for CliError {
    fn from(e: flowcast::io::IoError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(&cli.config).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    config.paths.resolve_relative_to(&base);
    let json = cli.format == "json";

    match cli.command {
        Command::Synth { days } => commands::synth(&config, days),
        Command::Structure { yes } => commands::structure(&config, yes),
        Command::Relevance { yes } => commands::relevance(&config, yes),
        Command::Popularity { cutoff } => commands::popularity(&config, cutoff),
        Command::Features { set, all } => commands::features(&config, set, all),
        Command::Train { set } => commands::train(&config, set),
        Command::Rolling { set, horizon, segment } => {
            commands::rolling(&config, set, horizon, segment, json)
        }
        Command::Gridsearch { first_origin } => commands::gridsearch(&config, first_origin, json),
        Command::Ablation { horizon } => commands::ablation(&config, horizon, json),
        Command::Explain { top_k, permutation } => {
            commands::explain(&config, top_k, permutation, json)
        }
    }
}
