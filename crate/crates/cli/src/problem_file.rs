//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 3, "m": 1,
//!   "f": "x1", "g": ["x1^2 + x2^2 + x3^2 - 1"],
//!   "x_star": [-1, 0, 0],
//!   "options": { "seed": 7 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use socurv_core::Problem;

use crate::error::CliError;

/// Optional settings; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub half_width: Option<f64>,
    pub step: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub radius_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub f: String,
    pub g: Vec<String>,
    pub x_star: Vec<f64>,
    #[serde(default)]
    pub options: Options,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the shape invariants and parses the expressions.
    pub fn problem(&self) -> Result<Problem, CliError> {
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(CliError::Invalid("n must be at least 1".into()));
        }
        if m == 0 || m > n {
            return Err(CliError::Invalid(format!(
                "need 1 <= m <= n, got m = {m}, n = {n}"
            )));
        }
        if self.g.len() != m {
            return Err(CliError::Invalid(format!(
                "m = {m} but {} constraint expressions given",
                self.g.len()
            )));
        }
        if self.x_star.len() != n {
            return Err(CliError::Invalid(format!(
                "x_star has length {}, expected {n}",
                self.x_star.len()
            )));
        }
        if self.x_star.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Invalid("x_star must be finite".into()));
        }
        let g: Vec<&str> = self.g.iter().map(String::as_str).collect();
        Ok(Problem::parse(n, &self.f, &g)?)
    }
}
