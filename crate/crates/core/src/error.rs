use thiserror::Error;

/// Every failure the library can report. The variant name doubles as the
/// error name printed by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("right-hand side incompatible with Neumann walls (mean {mean:e})")]
    IncompatibleRhs { mean: f64 },

    #[error("rank-one correction is singular (denominator {denominator:e})")]
    SingularCorrection { denominator: f64 },

    #[error("invalid alpha {alpha}: {reason}")]
    InvalidAlpha { alpha: f64, reason: &'static str },

    #[error("Courant number {courant} exceeds limit {limit}")]
    CflViolation { courant: f64, limit: f64 },

    #[error("interpolant spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("observation times not strictly increasing at record {index}")]
    NonMonotoneTime { index: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name used on standard error by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::IncompatibleRhs { .. } => "IncompatibleRHS",
            Error::SingularCorrection { .. } => "SingularCorrection",
            Error::InvalidAlpha { .. } => "InvalidAlpha",
            Error::CflViolation { .. } => "CFLViolation",
            Error::SpecMismatch(_) => "SpecMismatch",
            Error::InsufficientData(_) => "InsufficientData",
            Error::NonMonotoneTime { .. } => "NonMonotoneTime",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "IoError",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { key: key.into(), reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
