//! `turnpike`: solve, simulate, verify and sweep from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 numerical failure.

mod commands;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use report::Format;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    /// The report was written but some checks failed.
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<turnpike_core::Error> for CliError {
    fn from(e: turnpike_core::Error) -> Self {
        use turnpike_core::Error as E;
        match e {
            E::Domain(_) | E::NonPositiveRate { .. } | E::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "turnpike",
    version,
    about = "Optimal rates for the ribosome flow model and their turnpike bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Perron root and vector of B(λ).
    Perron {
        #[command(flatten)]
        #[serde(flatten)]
        source: Source,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
    /// Steady-state densities and production rate.
    SteadyState {
        #[command(flatten)]
        #[serde(flatten)]
        source: Source,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
    /// Integrate the flow equations from an initial state.
    Simulate {
        #[command(flatten)]
        #[serde(flatten)]
        source: Source,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[arg(long, default_value_t = 100.0)]
        t_final: f64,
        #[arg(long, default_value_t = turnpike_core::rfm::DEFAULT_STEP)]
        step: f64,
        /// zeros, half, random:SEED, or a file with one density per line.
        #[arg(long, default_value = "zeros")]
        x0: String,
        /// Emit every k-th step.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
    /// Rates minimizing the Perron root under the budget Σλ = n + 1.
    Optimize {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
    /// Check the proven bounds on optima over a range of n.
    Verify {
        #[command(flatten)]
        #[serde(flatten)]
        range: Range,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
    /// Summary of optima over a range of n.
    Sweep {
        #[command(flatten)]
        #[serde(flatten)]
        range: Range,
        #[command(flatten)]
        #[serde(flatten)]
        solver: Solver,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05])]
        eps: Vec<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        output: Output,
    },
}

/// Where the rates come from: `1_{n+1}`, the optimum for `n`, or a file.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Source {
    #[arg(long, conflicts_with = "rates", required_unless_present = "rates")]
    pub n: Option<usize>,
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Use the optimal rates for `--n` instead of all ones.
    #[arg(long, requires = "n")]
    pub optimal: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Range {
    #[arg(long, conflicts_with_all = ["n_min", "n_max"], required_unless_present_all = ["n_min", "n_max"])]
    pub n: Option<usize>,
    #[arg(long, requires = "n_max")]
    pub n_min: Option<usize>,
    #[arg(long, requires = "n_min")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Recursion,
    Equalize,
    /// Recursion, cross-checked against equalization.
    Both,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Solver {
    #[arg(long, value_enum, default_value = "recursion")]
    pub method: MethodArg,
    /// Solver tolerance; each solver has its own default.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn output(&self) -> &Output {
        match self {
            Command::Perron { output, .. }
            | Command::SteadyState { output, .. }
            | Command::Simulate { output, .. }
            | Command::Optimize { output, .. }
            | Command::Verify { output, .. }
            | Command::Sweep { output, .. } => output,
        }
    }
}

fn emit(command: &Command, report: &report::Report) -> Result<(), CliError> {
    let output = command.output();
    match &output.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            report.write(output.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.write(output.format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(command: &Command) -> Result<(), CliError> {
    let (report, verdict) = commands::run(command)?;
    emit(command, &report)?;
    verdict
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
