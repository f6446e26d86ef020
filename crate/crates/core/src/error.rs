use thiserror::Error;

/// Errors raised across the library.
///
/// Variants fall in two groups: invalid input (bad parameters, malformed
/// files, graphs that violate a precondition) and numerical failure
/// (a snapshot that is not reversible, an eigensolver that does not converge).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),

    #[error("n = {n} does not fit the {family} lattice convention: {reason}")]
    DimensionIncompatible {
        family: &'static str,
        n: usize,
        reason: String,
    },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("node {0} has no revealed entries")]
    IsolatedNode(String),

    #[error("initial value {value} at {which} lies outside [{lo}, {hi}]")]
    InitOutOfRange {
        which: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no stopping criterion is active")]
    NoStopCriterion,

    #[error("trajectory stride is {0}; step-to-step checks need stride 1")]
    StrideNotOne(usize),

    #[error("insufficient tail: {available} usable error samples, window needs {needed}")]
    InsufficientTail { available: usize, needed: usize },

    #[error("no records for the requested cell: {0}")]
    EmptyCell(String),

    #[error("matrix is not reversible: detailed-balance residual {0:e}")]
    NotReversible(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotReversible(_) | Error::NoConvergence { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
