//! `mbhd`: exact decompositions, sensitivity indices, Monte Carlo estimates
//! and reference studies for functions of dependent binary inputs.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "mbhd", version, about)]
struct Cli {
    /// Largest dimension handled without a cardinality cap.
    #[arg(long, global = true, env = "MBHD_MAX_EXACT_D")]
    max_exact_d: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decomposition coefficients of a model under a pmf.
    Decompose(AnalysisArgs),
    /// Sobol' indices, Sobol' matrix and Shapley effects.
    Indices(AnalysisArgs),
    /// Monte Carlo estimate of the coefficients from a sample file.
    Estimate(EstimateArgs),
    /// Draw a sample file from a pmf.
    Sample(SampleArgs),
    /// Regenerate the reference studies.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AnalysisArgs {
    /// pmf JSON: {"d", "probs", "order": "mask-ascending"}.
    #[arg(long)]
    pub pmf: PathBuf,
    /// Model JSON (truth_table, linear_threshold or bool_expr).
    #[arg(long)]
    pub model: PathBuf,
    /// Keep only subsets of at most this size.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Also write the Gram matrix as CSV.
    #[arg(long)]
    pub export_gram: bool,
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateArgs {
    /// CSV with binary columns and an optional final `y` column.
    #[arg(long)]
    pub samples: PathBuf,
    /// Known pmf for the Gram matrix; without it `Γ` is estimated from the samples.
    #[arg(long)]
    pub pmf: Option<PathBuf>,
    /// Model evaluated at the sampled inputs; without it the `y` column is used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cardinality cap `c` on the retained subsets.
    #[arg(long = "n-cap", alias = "cap")]
    pub cap: Option<usize>,
    /// Confidence level of the pointwise intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Configurations to predict at, as bit strings `x1x2...xd`. Defaults to
    /// every configuration when d ≤ 10.
    #[arg(long = "at", value_delimiter = ',')]
    pub at: Vec<String>,
    /// Replications for a truncation error report (needs --pmf, --model and --n-cap).
    #[arg(long)]
    pub truncation_replications: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub pmf: PathBuf,
    /// Attach model outputs as a `y` column.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Perceptron,
    Fgm,
    Mushroom,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub which: Study,
    /// Local copy of the mushroom dataset (CSV).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Gauss–Hermite nodes for the perceptron study.
    #[arg(long, default_value_t = mbhd_core::pmf::DEFAULT_QUADRATURE_NODES)]
    pub nodes: usize,
    /// Grid intervals on [0, 1/2] for the FGM study.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let max_d = cli
        .max_exact_d
        .unwrap_or(mbhd_core::subset::DEFAULT_MAX_EXACT_DIM);
    let res = match &cli.command {
        Command::Decompose(a) => commands::decompose(a, max_d),
        Command::Indices(a) => commands::indices(a, max_d),
        Command::Estimate(a) => commands::estimate(a, max_d),
        Command::Sample(a) => commands::sample(a),
        Command::Reproduce(a) => commands::reproduce(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", report::error_json(&e));
            ExitCode::FAILURE
        }
    }
}
