//! Command-line driver: argument parsing, configuration and output files.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// The iteration stopped before reaching the tolerance (exit 2).
    #[error("{0}")]
    NotConverged(String),
    /// A computation failed (exit 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<selfsim::Error> for CliError {
    fn from(e: selfsim::Error) -> Self {
        match e {
            selfsim::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("I/O error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "selfsim", version, about = "Self-similar coagulation profiles and diagnostics")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by all subcommands; they override values from `--config`.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Kernel family: constant, power or brownian.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    #[arg(long = "grid-min", global = true)]
    pub grid_min: Option<String>,
    #[arg(long = "grid-max", global = true)]
    pub grid_max: Option<String>,
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<String>,
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<String>,
    #[arg(long, global = true)]
    pub damping: Option<String>,
    /// decay_rate or mass.
    #[arg(long, global = true)]
    pub normalization: Option<String>,
    #[arg(long, global = true)]
    pub theta: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<String>,
    /// Configuration file with `section.key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the self-similar profile; writes profile.csv and report.json.
    SolveProfile,
    /// Solve the prefactor equation; writes prefactor.csv and prefactor_report.json.
    SolvePrefactor,
    /// Run verification suites; writes evidence.json and evidence.csv.
    Verify {
        /// Comma-separated subset of norms, operator, kernel, uniqueness.
        #[arg(long, default_value = "norms,operator,kernel")]
        suites: String,
    },
    /// Tabulate the representation density; writes gamma.csv.
    Gamma {
        /// Semicolon-separated `xi,eta` pairs; a default 5x5 table when omitted.
        #[arg(long)]
        points: Option<String>,
    },
    /// Print the weighted seminorms of a profile CSV.
    Norms {
        /// Profile CSV with columns x,f (as written by solve-profile).
        input: PathBuf,
    },
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("kernel.family", &self.kernel),
            ("kernel.alpha", &self.alpha),
            ("kernel.epsilon", &self.epsilon),
            ("grid.x_min", &self.grid_min),
            ("grid.x_max", &self.grid_max),
            ("grid.n", &self.grid_n),
            ("solver.tol", &self.tol),
            ("solver.max_iter", &self.max_iter),
            ("solver.damping", &self.damping),
            ("solver.normalization", &self.normalization),
            ("run.theta", &self.theta),
            ("run.seed", &self.seed),
            ("run.output_dir", &self.output),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.resolve()
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Messages go to stderr, results to files and stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = cli
        .common
        .resolve()
        .and_then(|cfg| commands::dispatch(&cfg, &cli.command));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
