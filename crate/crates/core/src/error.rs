use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller broke an operation's preconditions (bad axes, length mismatch, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A probability object failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A combinatorial object could not be built (infeasible counts, class too small, ...).
    #[error("construction error: {0}")]
    Construction(String),

    /// The request exceeds the desk-scale limits of an exhaustive routine.
    #[error("scale guard: {what} requires {required}, limit is {limit}")]
    ScaleGuard {
        what: String,
        required: u128,
        limit: u128,
    },

    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidDistribution(msg.into())
    }

    pub(crate) fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }

    pub(crate) fn guard(what: impl Into<String>, required: u128, limit: u128) -> Self {
        Error::ScaleGuard {
            what: what.into(),
            required,
            limit,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
