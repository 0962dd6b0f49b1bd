use std::path::PathBuf;

use thiserror::Error;

/// Exit status contract of the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Fail = 1,
    Invalid = 2,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] socurv_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "read",
            CliError::Write { .. } => "write",
            CliError::Json(_) => "malformed_file",
            CliError::Invalid(_) => "invalid_problem",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Input and validation failures exit with 2; failures of an analysis
    /// on a valid input exit with 1.
    pub fn exit(&self) -> Exit {
        use socurv_core::Error as E;
        match self {
            CliError::Read { .. } | CliError::Json(_) | CliError::Invalid(_) => Exit::Invalid,
            CliError::Write { .. } => Exit::Fail,
            CliError::Core(e) => match e {
                E::Parse(_) | E::Domain(_) | E::DimensionMismatch(_) | E::InvalidInput(_) => {
                    Exit::Invalid
                }
                _ => Exit::Fail,
            },
        }
    }

    /// Single-line JSON object for standard error.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit": self.exit().code(),
        })
        .to_string()
    }
}
