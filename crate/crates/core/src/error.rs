//! Error types shared by every module of the crate.

use thiserror::Error;

/// Failure to turn source text into an [`Expression`](crate::expr::Expression).
///
/// Offsets are byte offsets into the source string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("variable x{index} at byte {offset} is out of range for dimension {n}")]
    VariableOutOfRange {
        index: usize,
        n: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Evaluation left the domain of one of the elementary operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error in `{subexpr}`: {reason}")]
pub struct DomainError {
    /// Pretty-printed offending subexpression.
    pub subexpr: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("degenerate point: gradient norm {grad_norm:e} is not above {threshold:e}")]
    DegeneratePoint { grad_norm: f64, threshold: f64 },
    #[error(
        "rank-deficient constraint Jacobian: sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}"
    )]
    RankDeficientJacobian { sigma_min: f64, sigma_max: f64 },
    #[error("direction is not tangent: defect {defect:e} exceeds {tolerance:e}")]
    NotTangent { defect: f64, tolerance: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("first-order conditions violated: residual {residual_norm:e} exceeds {tolerance:e}")]
    FirstOrderViolated { residual_norm: f64, tolerance: f64 },
    #[error("Newton iteration diverged at parameter {at:e}")]
    NewtonDivergence { at: f64 },
    #[error("insufficient samples: need {need}, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(ParseError::Syntax { .. }) => "syntax_error",
            Error::Parse(ParseError::UnknownFunction { .. }) => "unknown_function",
            Error::Parse(ParseError::VariableOutOfRange { .. }) => "variable_out_of_range",
            Error::Domain(_) => "domain_error",
            Error::DegeneratePoint { .. } => "degenerate_point",
            Error::RankDeficientJacobian { .. } => "rank_deficient_jacobian",
            Error::NotTangent { .. } => "not_tangent",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::FirstOrderViolated { .. } => "first_order_violated",
            Error::NewtonDivergence { .. } => "newton_divergence",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
