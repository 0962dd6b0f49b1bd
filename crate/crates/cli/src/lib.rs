//! Command-line front end for `socurv-core`.
//!
//! Exit status: 0 when every requested check holds, 1 when a check fails
//! or is inconclusive, 2 for invalid input.

pub mod args;
pub mod commands;
pub mod error;
pub mod problem_file;
pub mod report;

pub use args::{Cli, Command};
pub use commands::Output;
pub use error::{CliError, Exit};
pub use problem_file::{Options, ProblemFile};

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Check(a) => commands::check(a),
        Command::Trace(a) => commands::trace(a),
        Command::Figure1(a) => commands::figure1(a),
        Command::Certify(a) => commands::certify(a),
    }
}
