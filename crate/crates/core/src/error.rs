use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside an operation's domain (empty sets, dimension mismatch,
    /// out-of-range parameters).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed measure or config document.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A request the operation refuses on purpose (size limits, hypotheses
    /// that do not hold).
    #[error("refused: {0}")]
    Refused(String),

    /// An iterative solver failed to make progress.
    #[error("solver failure: {message}")]
    Solver {
        message: String,
        /// Last iterate, kept for post-mortem inspection.
        iterate: Option<Vec<f64>>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
