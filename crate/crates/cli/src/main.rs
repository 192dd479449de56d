//! `annealtrack` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use annealtrack::builders::{DEFAULT_C, DEFAULT_C_TILDE};
use annealtrack::jpda::DEFAULT_TOP_K;
use annealtrack::Backend;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "annealtrack", version, about = "Annealing-based multi-target data association experiments")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a problem file.
    #[command(subcommand)]
    Build(BuildKind),
    /// Sample runs from a problem file.
    Sample(SampleArgs),
    /// Run the tracking recursion over a scenario.
    Track(TrackArgs),
    /// Lowest levels of the interpolated Hamiltonian and an optional trajectory.
    Spectrum(SpectrumArgs),
    /// Final ground occupation against anneal time.
    Sweep(SweepArgs),
    /// Fit a minimum-Gumbel law to per-run minimum energies.
    Gumbel(GumbelArgs),
}

#[derive(Subcommand, Debug)]
pub enum BuildKind {
    /// k non-attacking rooks on a k x k board.
    Krooks {
        #[arg(long)]
        k: usize,
    },
    /// k-rooks with rooks favoured on the first m diagonal cells.
    BiasedKrooks {
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        gamma0: f64,
        #[arg(long)]
        m: usize,
    },
    /// Association problem for one scan of a scenario.
    Mtda {
        #[arg(long)]
        scenario: PathBuf,
        /// Scan index, starting at 1.
        #[arg(long)]
        scan: usize,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct PenaltyArgs {
    /// Quadratic constraint scale.
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c: f64,
    /// Linear constraint scale.
    #[arg(long, default_value_t = DEFAULT_C_TILDE)]
    pub ctilde: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Sa,
    Adiabatic,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Sa => Backend::Sa,
            BackendArg::Adiabatic => Backend::Adiabatic,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value_t = BackendArg::Sa)]
    pub backend: BackendArg,
    /// Shots per run.
    #[arg(long, default_value_t = 1000)]
    pub shots: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// One or more anneal times.
    #[arg(long, num_args = 1.., default_values_t = [20.0])]
    pub anneal_time_us: Vec<f64>,
    /// Runs per anneal time.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Number of scans to process.
    #[arg(long)]
    pub scans: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 20.0)]
    pub anneal_time_us: f64,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Distinct feasible states kept per scan.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Add every feasible association to the sampled states.
    #[arg(long)]
    pub enumerate_feasible: bool,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Grid points on s in [0, 1].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Levels reported per grid point.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Also integrate one anneal of this duration and record occupations.
    #[arg(long)]
    pub anneal_time_us: Option<f64>,
    /// Integration steps; chosen automatically when absent.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Explicit anneal times; overrides the log-spaced range.
    #[arg(long, num_args = 1..)]
    pub anneal_time_us: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 500.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Grid points on s for the adiabatic metric.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Args, Debug)]
pub struct GumbelArgs {
    /// Problem to sample run minima from.
    #[arg(long, required_unless_present = "minima", conflicts_with = "minima")]
    pub problem: Option<PathBuf>,
    /// Text file of minima, one per line, instead of sampling.
    #[arg(long)]
    pub minima: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 20.0)]
    pub anneal_time_us: f64,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ANNEALTRACK_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| commands::UsageError(format!("ANNEALTRACK_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(commands::UsageError("ANNEALTRACK_THREADS must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::dispatch(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
