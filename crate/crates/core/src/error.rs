use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// One of the standing assumptions (A1)-(A4) fails on the supplied data.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },

    #[error("{context}: {detail}")]
    Solver {
        context: &'static str,
        detail: String,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error at line {line} ([{section}]): {source}")]
    Validation {
        section: String,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn solver(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Solver {
            context,
            detail: detail.into(),
        }
    }

    /// The named assumption, looking through validation wrappers.
    pub fn assumption(&self) -> Option<&'static str> {
        match self {
            Error::Assumption { assumption, .. } => Some(assumption),
            Error::Validation { source, .. } => source.assumption(),
            _ => None,
        }
    }
}
