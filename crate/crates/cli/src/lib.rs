//! Command-line front end: synthetic cohorts, CPTE matrices, density curves,
//! threshold sweeps, cross-validated classification and group statistics.

pub mod cache;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use cpte::synth::GroupSpec;
use serde_json::Value;

pub use config::RunConfig;
use config::{parse_band, parse_group, ClassifierArgs, CommonArgs, PipelineArgs};

/// Environment variable that caps the worker pool size.
pub const WORKERS_ENV: &str = "CPTE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "cpte", version, about = "Cross-plot transition entropy connectivity pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic two-group cohort.
    Synth(SynthArgs),
    /// Compute per-epoch synchronization matrices and group means.
    Cpte(CpteArgs),
    /// Connectivity density against threshold, per band and group.
    Density(DensityArgs),
    /// Cross-validated accuracy over a threshold grid.
    Sweep(SweepArgs),
    /// Cross-validated classification at one threshold.
    Classify(ClassifyArgs),
    /// Group medians and Welch t-tests per measure and band.
    Stats(StatsArgs),
    /// Time one pairwise CPTE matrix.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Cpte(_) => "cpte",
            Command::Density(_) => "density",
            Command::Sweep(_) => "sweep",
            Command::Classify(_) => "classify",
            Command::Stats(_) => "stats",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Group A as SUBJECTS:COUPLING.
    #[arg(long, value_parser = parse_group)]
    pub group_a: GroupSpec,
    /// Group B as SUBJECTS:COUPLING.
    #[arg(long, value_parser = parse_group)]
    pub group_b: GroupSpec,
    #[arg(long, default_value_t = 19)]
    pub channels: usize,
    #[arg(long, default_value_t = 120_000)]
    pub samples: usize,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 500.0)]
    pub fs: f64,
    /// Pass band of the noise sources, LOW:HIGH in Hz.
    #[arg(long, value_parser = parse_band, default_value = "0.5:44")]
    pub source_band: (f64, f64),
    /// Output amplitude scale.
    #[arg(long, default_value_t = 20.0)]
    pub amplitude: f64,
}

#[derive(Args, Debug)]
pub struct CpteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Comma list of band names (default: every manifest band).
    #[arg(long)]
    pub bands: Option<String>,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub bands: Option<String>,
    /// Threshold grid: "default" (0 to 1 in steps of 0.1) or a comma list.
    #[arg(long, default_value = "default")]
    pub grid: String,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, default_value = "all")]
    pub band: String,
    #[arg(long, default_value = "default")]
    pub grid: String,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, default_value = "all")]
    pub band: String,
    /// Binarization threshold.
    #[arg(long, default_value_t = 0.6)]
    pub th: f64,
    /// Permute labels across epochs before cross-validation (chance control).
    #[arg(long)]
    pub shuffle_labels: bool,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub bands: Option<String>,
    #[arg(long, default_value = "all")]
    pub measures: String,
    #[arg(long, default_value_t = 0.6)]
    pub th: f64,
    /// Average epochs per subject before testing.
    #[arg(long)]
    pub subject_mean: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 19)]
    pub channels: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Worker threads for the timed runs.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Cpte(a) => commands::cpte(a),
        Command::Density(a) => commands::density(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Classify(a) => commands::classify(a),
        Command::Stats(a) => commands::stats(a),
        Command::Bench(a) => commands::bench(a),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, S>(args: I) -> Result<Value>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    run(&cli)
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Output directory of a parsed command.
pub fn out_dir(cli: &Cli) -> PathBuf {
    match &cli.command {
        Command::Synth(a) => a.common.out.clone(),
        Command::Cpte(a) => a.common.out.clone(),
        Command::Density(a) => a.common.out.clone(),
        Command::Sweep(a) => a.common.out.clone(),
        Command::Classify(a) => a.common.out.clone(),
        Command::Stats(a) => a.common.out.clone(),
        Command::Bench(a) => a.common.out.clone(),
    }
}
