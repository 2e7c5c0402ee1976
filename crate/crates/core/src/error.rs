use thiserror::Error;

use crate::stl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unknown model `{name}` (valid: {valid})")]
    UnknownModel { name: String, valid: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("initialization is not a trajectory of the system (residual {residual:.3e})")]
    InconsistentInitialization { residual: f64 },

    #[error("continuation infeasible: pinned samples are not in the data span (residual {residual:.3e})")]
    ContinuationInfeasible { residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
