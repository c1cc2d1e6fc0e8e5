//! `psrf`: convergence diagnostics and the built-in studies from the shell.
//!
//! Exit codes: 0 converged, 3 not converged, 1 error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psrf_core::experiments::Experiment;
use psrf_core::{BatchPolicy, Reduction, StatisticKind};

#[derive(Parser)]
#[command(
    name = "psrf",
    version,
    about = "Lugsail and classic PSRF convergence diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate PSRF, ESS and the termination rule on chain files.
    Diagnose(DiagnoseArgs),
    /// Print the minimum ESS and the PSRF cutoff it implies.
    Threshold(ThresholdArgs),
    /// Estimate the multivariate effective sample size of chain files.
    Ess(EssArgs),
    /// Generate chains from a built-in target and write one CSV per chain.
    Simulate(SimulateArgs),
    /// Grow chains from a built-in target until the termination rule holds.
    Monitor(MonitorArgs),
    /// Re-run one of the built-in replication studies.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Stat {
    Lugsail,
    Classic,
}

impl From<Stat> for StatisticKind {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Lugsail => StatisticKind::Lugsail,
            Stat::Classic => StatisticKind::Classic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mv {
    Det,
    Maxeig,
}

impl From<Mv> for Reduction {
    fn from(m: Mv) -> Self {
        match m {
            Mv::Det => Reduction::Determinant,
            Mv::Maxeig => Reduction::MaxEigenvalue,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ChainInput {
    /// Chain files: one per chain, one row per iteration, one column per
    /// component.
    #[arg(long, num_args = 1.., required = true)]
    chains: Vec<PathBuf>,
    /// The chain files have no header row.
    #[arg(long)]
    no_header: bool,
    /// Iterations dropped from the start of every chain.
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    /// Batch size: sqrt, cube or an integer.
    #[arg(long, default_value = "sqrt")]
    batch: BatchPolicy,
}

#[derive(Args)]
struct Precision {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    eps: f64,
    /// Use this PSRF cutoff instead of the one implied by --eps.
    #[arg(long, conflicts_with = "eps")]
    delta: Option<f64>,
    /// Iterations per chain required before convergence can be declared
    /// (default: the ceiling of the minimum ESS, or 1 with --delta).
    #[arg(long)]
    min_effort: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: ChainInput,
    #[arg(long, value_enum, default_value_t = Stat::Lugsail)]
    stat: Stat,
    /// Reduction for more than one component.
    #[arg(long, value_enum, default_value_t = Mv::Det)]
    mv: Mv,
    #[command(flatten)]
    precision: Precision,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    eps: f64,
    /// Number of components.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Number of chains.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EssArgs {
    #[command(flatten)]
    input: ChainInput,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetName {
    T5,
    Ar1,
    Bimodal,
    Titanic,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, value_enum)]
    target: TargetName,
    /// Number of chains (default: the study's setting).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random-walk proposal variance (t5, bimodal) or scale on the Laplace
    /// covariance (titanic).
    #[arg(long)]
    proposal_var: Option<f64>,
    /// AR(1) autocorrelation.
    #[arg(long)]
    rho: Option<f64>,
    /// AR(1) innovation standard deviation.
    #[arg(long)]
    nu: Option<f64>,
    /// Passenger CSV for the titanic target.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Iterations per chain.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Args)]
struct MonitorArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    precision: Precision,
    /// Checkpoints: fixed:<k> or geometric:<rate>.
    #[arg(long, default_value = "geometric:1.1")]
    schedule: String,
    /// First checkpoint for a geometric schedule.
    #[arg(long, default_value_t = 50)]
    start: usize,
    /// Iterations per chain after which the run stops.
    #[arg(long, default_value_t = psrf_core::monitor::DEFAULT_MAX_ITERATIONS)]
    cap: usize,
    #[arg(long, value_enum, default_value_t = Stat::Lugsail)]
    stat: Stat,
    #[arg(long, value_enum, default_value_t = Mv::Det)]
    mv: Mv,
    #[arg(long, default_value = "sqrt")]
    batch: BatchPolicy,
    /// Leading fraction of each chain excluded at every checkpoint.
    #[arg(long, default_value_t = 0.0)]
    burnin_fraction: f64,
    /// Write the running trace (n, psrf, ess, converged) here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long)]
    experiment: Experiment,
    /// Replications per configuration (default: 100 for t5 and bimodal,
    /// 50 for ar1, 10 for titanic).
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    outdir: PathBuf,
    /// Passenger CSV, required for the titanic study.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Threshold(a) => commands::threshold(&a),
        Command::Ess(a) => commands::ess(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Monitor(a) => commands::monitor(&a),
        Command::Reproduce(a) => commands::reproduce(&a),
    };
    match outcome {
        Ok(commands::Outcome::Done) | Ok(commands::Outcome::Converged) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NotConverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
