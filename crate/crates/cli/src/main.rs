//! `npq`: marginal and joint queue-length PMFs, waiting-time densities and validation sweeps
//! for the two-level non-preemptive priority queue.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid parameters, 3 a quadrature that
//! did not converge, 4 a validation measure below `--min-mop`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Parser)]
#[command(name = "npq", version, about = "Two-level non-preemptive priority queue distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Low- and high-priority marginal PMFs.
    Marginal(MarginalArgs),
    /// Joint PMF grid, with optional CDF sections and level-set export.
    Joint(JointArgs),
    /// Waiting-time density of one level of a multi-level queue.
    Wait(WaitArgs),
    /// Measures of performance over a sweep of high-priority fractions.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Quad,
    Exact,
    Asym,
    Auto,
}

impl From<EngineArg> for npq::Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Quad => npq::Engine::Quadrature,
            EngineArg::Exact => npq::Engine::Exact,
            EngineArg::Asym => npq::Engine::Asymptotic,
            EngineArg::Auto => npq::Engine::Auto,
        }
    }
}

#[derive(Args, Clone)]
pub struct Common {
    /// Total traffic intensity, 0 <= r < 1.
    #[arg(long)]
    pub r: f64,
    /// Fraction of arrivals with high priority.
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    /// Number of servers; only the no-wait probability depends on it.
    #[arg(long, short = 'c', default_value_t = 1)]
    pub servers: u32,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    pub engine: EngineArg,
    /// Relative tolerance of the quadrature refinement.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    /// Refinements allowed before a quadrature counts as not converged.
    #[arg(long, default_value_t = npq::quadrature::DEFAULT_MAX_REFINEMENTS)]
    pub max_refinements: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the pole and cut parts of every value.
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Args)]
pub struct MarginalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
}

#[derive(Args)]
pub struct JointArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 20)]
    pub l_max: usize,
    #[arg(long, default_value_t = 20)]
    pub m_max: usize,
    /// Cumulative sections `F_ell(n) = sum_{m <= n} P(ell, m)` for the listed `ell`
    /// (e.g. `0-14,100`); every row of the grid when no list is given.
    #[arg(long, num_args = 0..=1, default_missing_value = "all")]
    pub cdf_sections: Option<String>,
    /// Export `(m, ell, log10 P)` rows for entries down to `--p-lim`.
    #[arg(long)]
    pub levels: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub p_lim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WaitMethod {
    Integral,
    Laguerre,
}

#[derive(Args)]
pub struct WaitArgs {
    /// Class intensities r_1,...,r_K, highest priority first.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<f64>,
    /// Level whose waiting time is wanted; the lowest one by default.
    #[arg(long)]
    pub kappa: Option<usize>,
    /// `start:step:stop` or a comma-separated list of times.
    #[arg(long, default_value = "0:0.1:10")]
    pub t_grid: String,
    #[arg(long, value_enum, default_value_t = WaitMethod::Integral)]
    pub method: WaitMethod,
    /// Number of Laguerre terms.
    #[arg(long, default_value_t = 400)]
    pub terms: usize,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long, default_value_t = npq::quadrature::DEFAULT_MAX_REFINEMENTS)]
    pub max_refinements: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum TestArg {
    Pairwise,
    Agg,
    Xhi,
    Xlo,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Against {
    /// Compare the two engines with each other.
    Engine,
    /// Compare with coefficients extracted from the generating function.
    Oracle,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub r: f64,
    /// `grid` (37 even points plus nu = r), `single` (uses --nu) or a comma-separated list.
    #[arg(long, default_value = "grid")]
    pub nu_sweep: String,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Defaults to 1e-9 for aggregation and 1e-12 otherwise.
    #[arg(long)]
    pub p_lim: Option<f64>,
    #[arg(long, default_value_t = npq::validation::DEFAULT_N_LIM)]
    pub n_lim: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub tests: Vec<TestArg>,
    #[arg(long, value_enum, default_value_t = Against::Engine)]
    pub against: Against,
    /// Joint engine checked by the aggregation, xhi and xlo tests.
    #[arg(long, value_enum, default_value_t = EngineArg::Exact)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long, default_value_t = 8.0)]
    pub min_mop: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Invalid command-line input that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Raised after the report has been written when a measure is below the threshold.
#[derive(Debug)]
pub struct MopFailure {
    pub count: usize,
    pub min_mop: f64,
}

impl std::fmt::Display for MopFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} measure(s) below {}", self.count, self.min_mop)
    }
}

impl std::error::Error for MopFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<MopFailure>().is_some() {
        return 4;
    }
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<npq::Error>() {
        Some(npq::Error::ConvergenceFailure { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Marginal(a) => commands::marginal(&a),
        Command::Joint(a) => commands::joint(&a),
        Command::Wait(a) => commands::wait(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("npq: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
