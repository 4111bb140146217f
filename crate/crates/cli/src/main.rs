//! `discourse`: runs the featurization, training and evaluation pipeline and
//! launches the HTTP service. Every command prints a JSON summary to stdout;
//! logs go to stderr (`RUST_LOG` controls verbosity).

mod commands;
mod exit;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "discourse", version, about = "Discourse-state forecasting pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Pipeline config (TOML); relative paths inside it resolve against its directory.
    #[arg(long, global = true, default_value = "discourse.toml")]
    pub config: PathBuf,
    /// Overrides the config's data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Movement id; defaults to the first movement in the config.
    #[arg(long, global = true)]
    pub movement: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a JSON-lines corpus into the movement's store.
    Ingest {
        /// Documents file, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// Input format; only "jsonl" is supported.
        #[arg(long, default_value = "jsonl")]
        format: String,
    },
    /// Build the core vocabulary and assign relevance layers.
    Layer,
    /// Compute the daily feature store.
    Featurize {
        /// Key-event table (.jsonl or .csv) to store before featurizing.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Train the forecaster and make it the current checkpoint.
    Train {
        /// Seed for initialization, shuffling and dropout; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum epochs; overrides the config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Forecast horizon Δ in days.
        #[arg(long)]
        horizon: Option<usize>,
        /// Context window L_c in days.
        #[arg(long)]
        window: Option<usize>,
        /// Train only on windows ending on or before this day.
        #[arg(long)]
        last_day: Option<NaiveDate>,
    },
    /// Backtest the current model (or score a predictions file).
    Evaluate(EvalArgs),
    /// Backtest every horizon and write per-class precision trend tables.
    Sweep(EvalArgs),
    /// Retrain up to each anchor and compare forecast and realized week directions.
    Replay {
        /// Comma-separated anchor dates.
        #[arg(long, value_delimiter = ',', required = true)]
        anchors: Vec<NaiveDate>,
        /// Platforms to replay separately; defaults to the movement's platforms.
        #[arg(long, value_delimiter = ',')]
        platforms: Vec<String>,
        /// Rolling band window in days.
        #[arg(long)]
        window: Option<usize>,
        /// Training seed for every replayed model.
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum epochs for every replayed model.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Generate a seeded synthetic corpus with known event spikes.
    Synth {
        /// Output directory for documents, scores, events, truth and config.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 120)]
        days: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// First day of the corpus; defaults to 2024-09-01.
        #[arg(long)]
        start: Option<NaiveDate>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Bind address; overrides DISCOURSE_HOST and the config.
        #[arg(long)]
        host: Option<String>,
        /// Port; overrides DISCOURSE_PORT and the config.
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// First anchor day; defaults to the day after the training span.
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last anchor day; defaults to the day before the last stored day.
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Rolling band window in days.
    #[arg(long)]
    pub window: Option<usize>,
    /// Report only this horizon δ.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Score these forecasts (JSON lines) instead of running the model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Report path; defaults to reports/metrics.json in the movement store.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match commands::run(&cli.global, cli.command) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // A closed pipe (e.g. `| head`) is not a failure of the command.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
