//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "socurv",
    version,
    about = "Second-order optimality checks for equality-constrained problems via curvature"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First- and second-order conditions, curvature comparison, reduced Hessian.
    Check(CheckArgs),
    /// Sample a section of M_f or M_g through x_star as CSV.
    Trace(TraceArgs),
    /// Planar curvatures, quadrant and the two traced curves (n = 2, m = 1).
    Figure1(Figure1Args),
    /// Sampled local-minimum certificate on a ball around x_star.
    Certify(CertifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Verdict tolerance for the projected Lagrangian Hessian.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Suppress the summary on standard error.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Finite-difference step for the reduced Hessian.
    #[arg(long)]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    /// Level set of f through x_star.
    F,
    /// Constraint manifold.
    G,
}

impl Manifold {
    pub fn label(self) -> &'static str {
        match self {
            Manifold::F => "f",
            Manifold::G => "g",
        }
    }
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "g")]
    pub manifold: Manifold,
    /// 1-based index into the tangent basis, or comma-separated components.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub direction: String,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// CSV destination; standard output otherwise.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Compare the traced second derivative with the second fundamental
    /// form and write a JSON sidecar (to --json, or next to --out).
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    #[command(flatten)]
    pub common: Common,
    /// Write `<PREFIX>_f.csv` and `<PREFIX>_g.csv`.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of the certified radius to sample.
    #[arg(long)]
    pub radius_factor: Option<f64>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Check(a) => &a.common,
            Command::Trace(a) => &a.common,
            Command::Figure1(a) => &a.common,
            Command::Certify(a) => &a.common,
        }
    }
}
