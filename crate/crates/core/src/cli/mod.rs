//! Command-line interface.
//!
//! Every flag of a subcommand can also come from a `--config` file (TOML or
//! JSON, or a run manifest written by an earlier run). Flags given on the
//! command line win over the file, which wins over built-in defaults.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::decoder::{Fallback, Mode};
use crate::error::Result;

pub use config::{RunManifest, VideoOutcome, EVAL_REPORT_VERSION, SEED_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "cadec",
    version,
    about = "Constraint-aware decoding for temporal action segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine a constraint set from a directory of training label files.
    Extract(ExtractArgs),
    /// Decode probability matrices into label files.
    Decode(DecodeArgs),
    /// Score predicted label files against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Measure decode time as the sequence length grows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractArgs {
    /// Directory of training label files (*.txt).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Class mapping file with `name<TAB>index` lines.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Number of classes when no mapping is given [default: largest label + 1].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Output constraint file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative widening of the duration bounds [default: 0].
    #[arg(long)]
    pub slack: Option<f64>,
    /// Where to write the run manifest [default: next to the output].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Read settings from a TOML/JSON file or a run manifest.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeArgs {
    /// Probability matrix files (*.csv, *.bin) or directories of them.
    #[arg(long, num_args = 1..)]
    pub probs: Option<Vec<PathBuf>>,
    /// Constraint file written by `extract`.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Decoding mode [default: hard].
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Weight of the transition log-confidence [default: 1].
    #[arg(long)]
    pub w_transition: Option<f64>,
    /// Weight of soft duration penalties [default: 1].
    #[arg(long)]
    pub w_duration: Option<f64>,
    /// Soft-mode penalty per violation [default: 10].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Floor applied to probabilities before taking logs [default: 1e-10].
    #[arg(long)]
    pub epsilon_floor: Option<f64>,
    /// Behavior when hard constraints admit no sequence [default: error].
    #[arg(long, value_enum)]
    pub fallback: Option<Fallback>,
    /// Output directory for label files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write class names from this mapping instead of indices.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    /// Directory of predicted label files.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Directory of ground-truth label files with the same names.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Classes (names or indices) excluded from every metric.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub ignore: Option<Vec<String>>,
    /// JSON report path [default: <pred>/eval_report.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generator spec as JSON [default: the built-in 10-class benchmark spec].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Training videos [default: 50].
    #[arg(long)]
    pub train: Option<usize>,
    /// Test videos [default: 20].
    #[arg(long)]
    pub test: Option<usize>,
    /// Override the spec's noise level.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// RNG seed [default: $CADEC_SEED or 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability matrix format [default: csv].
    #[arg(long, value_enum)]
    pub format: Option<ProbFormat>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProbFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchArgs {
    /// Sequence lengths to time, strictly increasing [default: 1000,2000,4000,8000,16000].
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Number of classes [default: 48].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Number of allowed transitions [default: 150].
    #[arg(long)]
    pub transitions: Option<usize>,
    /// Timed runs per length; the median is reported [default: 5].
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output [default: bench.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(args) => commands::extract(config::layer(args, "extract")?),
        Command::Decode(args) => commands::decode(config::layer(args, "decode")?),
        Command::Eval(args) => commands::eval(config::layer(args, "eval")?),
        Command::Synth(args) => commands::synth(config::layer(args, "synth")?),
        Command::Bench(args) => commands::bench(config::layer(args, "bench")?),
    }
}
