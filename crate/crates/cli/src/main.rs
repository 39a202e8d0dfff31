//! `tvkern`: simulation sweeps, single fits, transfer fits, cross-validation, the empirical
//! pipeline and the oracle-rate calculator.

mod commands;
mod input;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvkern::bandwidth::FoldScheme;
use tvkern::datagen::{BiasKind, EstimatorId};
use tvkern::empirical::CovariateMode;
use tvkern::{ErrorKind, Method};

#[derive(Debug, Parser)]
#[command(
    name = "tvkern",
    version,
    about = "Kernel regression and transfer learning for locally stationary time series"
)]
pub struct Cli {
    /// Base seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Simulation config file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the gamma sweep and write per-replication and summary error tables.
    Simulate(SimulateArgs),
    /// Fit one estimator and write its surface on a grid.
    Fit(FitArgs),
    /// Fit the transfer estimator and write the transfer and bias surfaces.
    Transfer(TransferArgs),
    /// Cross-validate a bandwidth grid and write the score table.
    Cv(CvArgs),
    /// Run the empirical pipeline on dated CSV series (default: the built-in fixture).
    Empirical(EmpiricalArgs),
    /// Print the oracle case, bandwidth order and rate order.
    Rates(RatesArgs),
}

/// Overrides of the simulation config.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Start from 2000/20000 points and 50 replications instead of the desk-scale defaults.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub t1: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub gamma_step: Option<f64>,
    /// Comma-separated bias families (quad, cubic, exp).
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<BiasKind>>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated subset of NW-T, LL-T, NW-TL, LL-TL.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<EstimatorId>>,
}

/// Bandwidth given on the command line; missing parts are cross-validated.
#[derive(Debug, Clone, Args)]
pub struct BandwidthArgs {
    #[arg(long)]
    pub h_time: Option<f64>,
    /// One value per covariate, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub h_cov: Option<Vec<f64>>,
    /// Fold scheme for cross-validation: contiguous or interleaved.
    #[arg(long, default_value = "contiguous")]
    pub fold_scheme: FoldScheme,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `u,x,y` CSV; without it a target sample is simulated from the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "ll")]
    pub method: Method,
    #[command(flatten)]
    pub bw: BandwidthArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Target `u,x,y` CSV; with `--source`, replaces the simulated pair.
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    #[arg(long, requires = "target")]
    pub source: Option<PathBuf>,
    /// Bias family of the simulated pair.
    #[arg(long, default_value = "quad")]
    pub family: BiasKind,
    /// Bias strength of the simulated pair.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, default_value = "ll")]
    pub method: Method,
    /// Fold scheme for both cross-validations: contiguous or interleaved.
    #[arg(long, default_value = "contiguous")]
    pub fold_scheme: FoldScheme,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "ll")]
    pub method: Method,
    #[arg(long, default_value_t = tvkern::bandwidth::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value = "contiguous")]
    pub fold_scheme: FoldScheme,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    /// Daily source response series (`date,value`).
    #[arg(long, requires_all = ["source_covariate", "target_response", "target_covariate"])]
    pub source_response: Option<PathBuf>,
    #[arg(long)]
    pub source_covariate: Option<PathBuf>,
    #[arg(long)]
    pub target_response: Option<PathBuf>,
    #[arg(long)]
    pub target_covariate: Option<PathBuf>,
    /// Column holding the values in every input file.
    #[arg(long, default_value = "value")]
    pub column: String,
    /// lagged_daily, weekly_average or related_fuel_lag.
    #[arg(long, default_value = "lagged_daily")]
    pub source_mode: CovariateMode,
    #[arg(long, default_value = "weekly_average")]
    pub target_mode: CovariateMode,
    /// Longest run of missing values that is filled.
    #[arg(long, default_value_t = 3)]
    pub max_gap: usize,
    #[arg(long, default_value_t = 10)]
    pub min_valid: usize,
    #[arg(long, default_value = "interleaved")]
    pub fold_scheme: FoldScheme,
    /// Also copy the fixture input files into the output directory.
    #[arg(long)]
    pub write_fixture: bool,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub t0: u64,
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    /// Local-stationarity exponent in (0, 1].
    #[arg(long)]
    pub r: f64,
    /// Bias curvature in (0, 1].
    #[arg(long)]
    pub eta2: f64,
}

fn parse_estimator(s: &str) -> Result<EstimatorId, String> {
    EstimatorId::ALL
        .into_iter()
        .find(|id| id.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown estimator '{s}' (NW-T, LL-T, NW-TL, LL-TL)"))
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprint!("error[usage]: {}", text.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error[invalid_input]: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
