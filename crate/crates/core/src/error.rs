use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value {value} for model '{model_id}' at sample {index}")]
    NonFinite { model_id: String, index: usize, value: f64 },

    #[error("label {value} at sample {index} is not -1 or +1")]
    InvalidLabel { index: usize, value: String },

    #[error("unknown model id '{0}'")]
    UnknownModel(String),

    #[error("duplicate model id '{0}'")]
    DuplicateModel(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A precondition on a numeric argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the caller's arguments rather than by the
    /// contents of an input file.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::UnknownModel(_) | Error::Domain(_) | Error::Empty(_))
    }
}
