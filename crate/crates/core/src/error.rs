use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown slot id {0}")]
    UnknownSlot(usize),

    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("unknown product {0}")]
    UnknownProduct(String),

    #[error("invalid influence probability {p} at slot {slot}, user {user}")]
    InvalidProbability { slot: usize, user: usize, p: f64 },

    #[error("duplicate influence entry at slot {slot}, user {user}")]
    DuplicateEntry { slot: usize, user: usize },

    #[error("slot catalog is empty")]
    EmptyCatalog,

    #[error("slot {0} has zero cost")]
    ZeroCostSlot(usize),

    #[error("expected a {expected} instance, found {found}")]
    VariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: column `{column}`: {message}")]
    Malformed {
        path: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("allocation failed validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
