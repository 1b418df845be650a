//! `arcollect`: invoice late-payment prediction and collection prioritization.

use std::path::PathBuf;
use std::process::ExitCode;

use arcollect_core::models::ModelKind;
use arcollect_core::YearMonth;
use chrono::NaiveDate;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "arcollect",
    version,
    about = "Predict late invoice payments and rank customers for collection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed for generation and model fitting.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Invoice CSV (default: <out>/invoices.csv).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Feature window in months.
    #[arg(long, global = true)]
    window: Option<u32>,

    /// Model kind to train.
    #[arg(long, global = true, value_parser = parse_kind)]
    model: Option<ModelKind>,

    /// Model file (default: <out>/model.json).
    #[arg(long, global = true)]
    model_path: Option<PathBuf>,

    /// Ranking date, YYYY-MM-DD.
    #[arg(long, global = true)]
    as_of: Option<NaiveDate>,

    /// Due-date month for plotdata, YYYY-MM.
    #[arg(long, global = true)]
    month: Option<YearMonth>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Write a seeded synthetic invoice CSV.
    Generate,
    /// Write the per-invoice feature CSV.
    Featurize,
    /// Fit a model on the train partition.
    Train,
    /// Score the test partition with a saved model.
    Evaluate,
    /// Rank customers with open invoices by risk.
    Rank,
    /// Test accuracy over feature windows and model kinds.
    Sweep,
    /// Rolling train/validation/test snapshots.
    Snapshots,
    /// Daily invoice counts and amounts by predicted label.
    Plotdata,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: arcollect_core::Error| e.to_string())
}

/// Failure with its exit status: 2 for configuration and usage problems, 1 otherwise.
pub(crate) struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub(crate) fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<arcollect_core::Error>() {
            Some(arcollect_core::Error::Config(_)) => 2,
            _ => 1,
        };
        Self { code, error }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(input) = &cli.input {
        cfg.input = Some(input.clone());
    }
    if let Some(w) = cli.window {
        cfg.window_months = w;
    }
    if let Some(kind) = cli.model {
        cfg.model = kind;
    }
    if let Some(p) = &cli.model_path {
        cfg.model_path = Some(p.clone());
    }
    if let Some(d) = cli.as_of {
        cfg.as_of = Some(d);
    }
    if let Some(m) = cli.month {
        cfg.plot_month = Some(m);
    }
    cfg.generator.seed = cfg.seed;
    cfg.validate().map_err(Failure::usage)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| {
        std::fs::create_dir_all(&cfg.out)?;
        match cli.command {
            Command::Generate => commands::generate(&cfg),
            Command::Featurize => commands::featurize(&cfg),
            Command::Train => commands::train(&cfg),
            Command::Evaluate => commands::evaluate(&cfg),
            Command::Rank => commands::rank(&cfg),
            Command::Sweep => commands::sweep(&cfg),
            Command::Snapshots => commands::snapshots(&cfg),
            Command::Plotdata => commands::plotdata(&cfg),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
