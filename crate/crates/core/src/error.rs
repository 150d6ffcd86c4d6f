use thiserror::Error;

/// Errors raised by the estimation and testing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed design: {0}")]
    Structural(String),

    #[error(
        "group {group} is degenerate: n = {n} leaves {df} residual degrees of freedom \
         (at least {required} observations are needed with these covariates)"
    )]
    DegenerateGroup {
        group: usize,
        n: usize,
        df: isize,
        required: usize,
    },

    #[error("pooled residual degrees of freedom are {0}; the classical test needs at least 1")]
    DegeneratePooled(isize),

    #[error("observation {index} has leverage {leverage} (h = 1); leverage-adjusted residuals are undefined")]
    LeverageSingularity { index: usize, leverage: f64 },

    #[error("index {index} out of range (expected 1..={max})")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
