//! Command-line surface. The help text is generated from these definitions,
//! so every documented flag is a parsed flag and nothing else is accepted.

use std::path::PathBuf;

use asa_core::nn::{InsertionPoint, Method};
use asa_core::train::AsaMode;
use asa_core::verify::Scope;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

const PRECEDENCE: &str = "Settings resolve as: built-in defaults, then the --config file, then explicit flags.\n\
Exit codes: 0 success, 1 invalid input or config, 2 failure while running.";

#[derive(Debug, Parser)]
#[command(name = "asa", version, about = "Adversarial style augmentation lab", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic multi-domain benchmark
    GenData(GenDataArgs),
    /// Train one model on the source split
    Train(TrainArgs),
    /// Score a checkpoint on target domains
    Eval(EvalArgs),
    /// Check analytic gradients against central differences
    Gradcheck(GradcheckArgs),
    /// Train and score every cell of a grid for each seed
    Sweep(SweepArgs),
    /// 𝒜-distance between split features, with a PCA export
    Adistance(ADistanceArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Dataset seed (overrides data.seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Run config whose [data] section describes the benchmark
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source split size (overrides data.train_size)
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Size of each target split (overrides data.target_size)
    #[arg(long)]
    pub target_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (TOML with model, method, train, data, eval sections)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory written by gen-data
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for model.advt, run.jsonl and config.toml
    #[arg(long)]
    pub out: PathBuf,
    /// Training seed (overrides train.seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of epochs (overrides train.epochs)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Perturbation method: none, advstyle, dsu, mixstyle, padain
    #[arg(long, value_parser = serde_enum::<Method>)]
    pub method: Option<Method>,
    /// Reversal strength λ (overrides method.lambda)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated insertion points: conv1, pool1, block1..block4
    #[arg(long, value_delimiter = ',', value_parser = serde_enum::<InsertionPoint>)]
    pub points: Option<Vec<InsertionPoint>>,
    /// Adversarial procedure: grl or iterative
    #[arg(long, value_parser = serde_enum::<AsaMode>)]
    pub mode: Option<AsaMode>,
    /// Also write a checkpoint every N epochs
    #[arg(long, value_name = "N")]
    pub checkpoint_every: Option<usize>,
    /// Record per-epoch wall-clock seconds in the log (breaks byte-identity)
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated split names to score (default: every target)
    #[arg(long, value_delimiter = ',')]
    pub domains: Option<Vec<String>>,
    /// Output directory for report.json and report.csv
    #[arg(long)]
    pub out: PathBuf,
    /// Run config for eval settings (default: config.toml beside the checkpoint)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed recorded in the report and used for 𝒜-distance splits
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report label
    #[arg(long, default_value = "eval")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// ops, advstyle or backbone (default: all three)
    #[arg(long, value_parser = parse_scope)]
    pub scope: Option<Scope>,
    /// Random instances per case
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Seed of the random instances
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pass threshold on the relative error
    #[arg(long, default_value_t = 1e-4)]
    pub rtol: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid file: a [base] run config plus an [axes] table
    #[arg(long)]
    pub grid: PathBuf,
    /// Comma-separated training seeds
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Output directory for sweep.csv and sweep.json
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset directory (default: generate from the base [data] section)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Parallel runs (falls back to ASA_WORKERS, then the core count)
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ADistanceArgs {
    /// Model checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated source:target split pairs (default: train to each target)
    #[arg(long)]
    pub pairs: Option<String>,
    /// Output directory for adistance.csv, pca.csv and pca_explained.csv
    #[arg(long)]
    pub out: PathBuf,
    /// Run config for eval settings (default: config.toml beside the checkpoint)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the classifier's train/test split
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses a unit enum by the name it carries in config files.
fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    Scope::parse(s).map_err(|e| e.to_string())
}
