//! `isingml` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "isingml", version, about = "Ising-energy classifiers and their evaluation protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a Gaussian class-conditional dataset as CSV.
    Synth(SynthArgs),
    /// Fit one method on a whole dataset and save the model.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Repeated stratified train/test benchmark of several methods.
    Benchmark(RunArgs),
    /// Training-set-size sweep against a fixed held-out test set.
    Sweep(RunArgs),
    /// Paired Wilcoxon signed-rank test on two columns of a CSV.
    Stats(StatsArgs),
    /// Minimise the energy of an Ising problem read from a text file.
    Solve(SolveArgs),
}

/// Options shared by `benchmark`, `sweep` and `train`.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, env = "ISINGML_CONFIG")]
    pub config: Option<PathBuf>,
    /// Input dataset CSV (`sample_id,label,features...`).
    #[arg(long, env = "ISINGML_DATA")]
    pub data: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "ISINGML_SEED")]
    pub seed: Option<u64>,
    /// Comma-separated methods: sa, random, field, exhaustive, rbm, ridge.
    #[arg(long, env = "ISINGML_METHODS")]
    pub methods: Option<String>,
    /// Principal components to keep; 0 disables PCA.
    #[arg(long, env = "ISINGML_PCA_K")]
    pub pca_k: Option<usize>,
    /// Keep the original features with the largest PC1 loadings instead of projecting.
    #[arg(long, env = "ISINGML_PC1_FEATURES", conflicts_with = "pca_k")]
    pub pc1_features: Option<usize>,
    /// Number of splits (benchmark) or subsamples per fraction (sweep).
    #[arg(long, env = "ISINGML_SPLITS")]
    pub splits: Option<usize>,
    /// Comma-separated training fractions for `sweep`.
    #[arg(long, env = "ISINGML_FRACTIONS")]
    pub fractions: Option<String>,
    #[arg(long, env = "ISINGML_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, env = "ISINGML_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    /// Two classes, means ±delta on every coordinate.
    Shift,
    /// Two classes, means ±delta on the first coordinate.
    Axis,
    /// `classes` classes, class c has mean delta on coordinate c mod M.
    Axes,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "shift")]
    pub kind: SynthKind,
    /// JSON or TOML file with explicit means and covariances; overrides --kind.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 250)]
    pub n_per_class: usize,
    #[arg(long, env = "ISINGML_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Method to train.
    #[arg(long)]
    pub method: String,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, env = "ISINGML_DATA")]
    pub data: PathBuf,
    /// Also write metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-sample class probabilities as CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// CSV input, e.g. a metrics file written by `benchmark`.
    #[arg(long)]
    pub input: PathBuf,
    /// Compare two columns directly, paired by row.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["metric", "methods"])]
    pub columns: Option<Vec<String>>,
    /// With a metrics file: the test metric to compare.
    #[arg(long, default_value = "balanced_accuracy")]
    pub metric: String,
    /// With a metrics file: the two methods to compare, e.g. `sa,ridge`.
    #[arg(long)]
    pub methods: Option<String>,
    /// With a sweep metrics file: restrict to one training fraction.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Bonferroni family size.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolverKind {
    Sa,
    Random,
    Field,
    Exhaustive,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Problem in text form: N, then N fields, then `i j J_ij` lines.
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "sa")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub beta_initial: f64,
    #[arg(long, default_value_t = 3.0)]
    pub beta_final: f64,
    #[arg(long, default_value_t = 1000)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Configurations to report and to average.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    #[arg(long, env = "ISINGML_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "ISINGML_THREADS")]
    pub threads: Option<usize>,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Solve(a) => commands::solve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
