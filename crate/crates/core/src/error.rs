use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("computation failed: {what} (residual {residual:e})")]
    Computation { what: String, residual: f64 },

    #[error("column {0} vanishes after row restriction")]
    DegenerateColumn(usize),

    #[error("problem is infeasible (dual certificate value {certificate:e})")]
    Infeasible { certificate: f64 },

    #[error("rank-deficient system: {0}")]
    Rank(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
