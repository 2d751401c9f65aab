use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod io;

/// Ordinal classification with unimodal soft labels.
#[derive(Parser, Debug)]
#[command(name = "ordsoft", version)]
struct Cli {
    /// Worker threads for training sweeps (default: all cores).
    #[arg(long, global = true, env = "ORDSOFT_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a soft target matrix as CSV.
    Softlabels(SoftlabelsArgs),
    /// Generate a synthetic ordinal dataset or paired grades.
    Synth(SynthArgs),
    /// Train one model on a CSV dataset.
    Train(TrainArgs),
    /// Run the repeated-holdout protocol from an experiment config.
    Sweep(SweepArgs),
    /// Compute ordinal metrics for a model, a predictions file or a results file.
    Evaluate(EvaluateArgs),
    /// Compare predicted contingency tables with a ground-truth table.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
pub struct SmoothingArgs {
    /// Weight of the soft part of the target.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Neighbour mass (triangular).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Distance exponent (exponential).
    #[arg(long)]
    pub p: Option<f64>,
    /// Concentration (beta).
    #[arg(long)]
    pub concentration: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SoftlabelsArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub strategy: ordsoft::Strategy,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Emit one `true_grade,grade,probability` line per entry instead of the matrix.
    #[arg(long)]
    pub plot_data: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON spec; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generate paired grades instead of a feature dataset.
    #[arg(long)]
    pub paired: bool,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub flip: Option<f64>,
    /// Total samples (paired mode).
    #[arg(long)]
    pub n: Option<usize>,
    /// Also write the contingency table of the pairs (paired mode).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON training config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<ordsoft::Strategy>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub concentration: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of the data held out for early stopping.
    #[arg(long, default_value_t = 0.3)]
    pub validation_fraction: f64,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Training report (JSON); stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub root_seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model JSON written by `train`; needs --data.
    #[arg(long, requires = "data", conflicts_with_all = ["predictions", "runs"])]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV with `true,predicted` columns; needs --classes.
    #[arg(long, requires = "classes", conflicts_with = "runs")]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Results file written by `sweep`; prints the recomputed summary.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Ground-truth contingency table CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Predicted tables named `<strategy>-<seed>.csv`, or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub tables: Vec<PathBuf>,
    #[arg(long, default_value_t = ordsoft::joint::DEFAULT_KLD_EPSILON)]
    pub epsilon: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Errors caused by the invocation rather than by the run.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: worker count must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Softlabels(a) => commands::softlabels(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("run `ordsoft help` for usage");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
