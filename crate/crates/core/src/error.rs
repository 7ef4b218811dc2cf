use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A node collapsed toward the origin before normalization; the step was far too large.
    #[error("projection failure at node {node}: norm {norm:e}")]
    ProjectionFailure { node: usize, norm: f64 },

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("parse error on line {line} (key `{key}`): {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
