//! `segretool`: every pipeline stage behind one command with JSON output.
//!
//! Exit codes: 0 success, 1 a numerical check failed, 2 usage error.

mod commands;
mod literal;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segre_core::continuation::ContinuationMode;
use segre_core::Error;

#[derive(Parser, Debug)]
#[command(name = "segretool", version, about = "Segre varieties, continuation and monodromy of nonminimal hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Random seed; the SEGRETOOL_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance override, e.g. `--tol scalar=1e-9` (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE", global = true)]
    pub tol: Vec<String>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

/// Where the surface (and default germ) come from.
#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Surface definition file (JSON).
    #[arg(long, conflicts_with = "catalog")]
    pub surface: Option<PathBuf>,
    /// Catalog entry name, e.g. `mlog` or `malpha(1/3)`.
    #[arg(long)]
    pub catalog: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct GermSource {
    #[command(flatten)]
    pub source: Source,
    /// Germ spec file (JSON); defaults to the catalog entry's first germ.
    #[arg(long)]
    pub germ: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Branch tracking for closed-form germs, Segre steps otherwise.
    Auto,
    BranchTracking,
    SegreSteps,
}

impl From<Mode> for ContinuationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Auto => ContinuationMode::Auto,
            Mode::BranchTracking => ContinuationMode::BranchTracking,
            Mode::SegreSteps => ContinuationMode::SegreSteps,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Levi signature (k,l) at a point of M \ X.
    Levi {
        #[command(flatten)]
        source: Source,
        /// Point as comma-separated complex literals, e.g. "0,0,0.1".
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Sample points of the Segre variety of a point.
    Segre {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// Emit CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Monte-Carlo cloud of the Segre sets of a point.
    Cloud {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Samples per level.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Even Segre chain between two points.
    Chain {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        csv: bool,
    },
    /// Continue a germ along a path, to a point, or around loops.
    Continue {
        #[command(flatten)]
        germ: GermSource,
        /// Path spec file (JSON).
        #[arg(long, conflicts_with_all = ["target", "loop_turns"])]
        path: Option<PathBuf>,
        /// Straight continuation to this point.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "loop_turns")]
        target: Option<String>,
        /// Loops around X through the germ base.
        #[arg(long, allow_hyphen_values = true)]
        loop_turns: Option<i64>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// Monodromy matrix, its logarithm, Jordan data and finite order.
    Monodromy {
        #[command(flatten)]
        germ: GermSource,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        loop_turns: i64,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// Quadric fits of the images of both sides of M \ X.
    Transfer {
        #[command(flatten)]
        germ: GermSource,
        /// A point of M-; defaults to the catalog entry's probe.
        #[arg(long, allow_hyphen_values = true)]
        minus: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// The k-root of a surface in exponential form (and of its germ).
    Kroot {
        #[command(flatten)]
        germ: GermSource,
        #[arg(long)]
        k: u32,
    },
    /// Run the full check pipeline on catalog entries.
    Verify {
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        catalog: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// List catalog entries, or export one as JSON.
    Catalog {
        /// Entry to export.
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        catalog: Option<String>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    /// The command ran and printed its result, but a check failed.
    #[error("{0}")]
    ChecksFailed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::BadVariable(..)
            | Error::OutsideDomain(_)
            | Error::NearExceptional(_)
            | Error::InvalidSurface(_)
            | Error::UnknownEntry(_)
            | Error::Precondition(_)
            | Error::Format(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("segretool: {f}");
            ExitCode::from(match f {
                Failure::Usage(_) => 2,
                Failure::Numerical(_) | Failure::ChecksFailed(_) => 1,
            })
        }
    }
}
