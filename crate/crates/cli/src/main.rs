//! `crashtweet`: batch driver for the accident-post pipeline.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, PipelineConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "crashtweet", version, about = "Detect accident reports in geo-tagged posts")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Override any config key, e.g. `--set featsel.conf_min=0.9`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic corpus, accident log and detector feed.
    Synth,
    /// Stem the annotated corpus and build the binary token matrix.
    Preprocess,
    /// Select individual and paired token features.
    Features,
    /// Train the classifier on the selected features.
    Train,
    /// K-fold cross-validation of the whole learner.
    Evaluate,
    /// Match detected posts to the accident log.
    ValidateLog,
    /// Score detected posts against loop-detector anomalies.
    ValidateTraffic,
    /// Summarize all artifacts.
    Report,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(
        cli.config.as_deref(),
        &Overrides {
            seed: cli.seed,
            out_dir: cli.out_dir.clone(),
            set: cli.set.clone(),
        },
    )?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Features => commands::features(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::ValidateLog => commands::validate_log(&cfg),
        Command::ValidateTraffic => commands::validate_traffic(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("crashtweet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("crashtweet: internal error (panic)");
            ExitCode::from(1)
        }
    }
}
