use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

mod commands;
mod config;
mod expr;

use config::{ExperimentConfig, RouteChoice};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

/// Batch driver for the time-fractional wave laboratory.
///
/// Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
/// 3 acceptance failure.
#[derive(Debug, Parser)]
#[command(name = "fracwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Forward route, overriding `solver.route` and `observation.route`.
    #[arg(long, value_name = "timestep|resolvent|spectral|all")]
    route: Option<RouteChoice>,
    /// Noise seed, overriding `inversion.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the forward problem with the selected routes and compare them.
    Simulate(Common),
    /// Eigenvalue clusters, Riesz projections and their identity residuals.
    Spectrum(Common),
    /// Build the subdomain observation map and report its rank.
    Observability(Common),
    /// Synthesize observations of the configured data and recover it.
    Invert(Common),
    /// Run the acceptance suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Corrupt the Mittag-Leffler value checked by criterion 2.
        #[arg(long, hide = true)]
        tamper_mittag_leffler: bool,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    if let Some(route) = common.route {
        cfg.solver.route = route;
        if route != RouteChoice::All {
            cfg.observation.route = route;
        }
    }
    if let Some(seed) = common.seed {
        cfg.inversion.seed = Some(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&resolve(&c)?),
        Command::Spectrum(c) => commands::spectrum(&resolve(&c)?),
        Command::Observability(c) => commands::observability(&resolve(&c)?),
        Command::Invert(c) => commands::invert(&resolve(&c)?),
        Command::Selftest {
            common,
            only,
            tamper_mittag_leffler,
        } => commands::selftest(common.out.as_deref(), &only, tamper_mittag_leffler),
    }
}

fn main() -> ExitCode {
    if std::env::args_os().len() == 1 {
        Cli::command().print_help().ok();
        println!();
        return ExitCode::SUCCESS;
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
