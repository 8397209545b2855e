use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (bad shape, out-of-range value, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Malformed text in one of the on-disk formats.
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    /// A computed result failed its own post-condition check.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("responder aborted: {0}")]
    Aborted(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            path: "<input>".to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Attaches a file name to syntax errors raised while parsing text.
    pub fn with_path(self, p: &str) -> Self {
        match self {
            Error::Syntax {
                line,
                column,
                message,
                ..
            } => Error::Syntax {
                path: p.to_string(),
                line,
                column,
                message,
            },
            other => other,
        }
    }
}

/// Shorthand for `Err(Error::Invalid(..))` with `format!` arguments.
macro_rules! bail {
    ($($arg:tt)*) => {
        return Err($crate::error::Error::Invalid(format!($($arg)*)))
    };
}
pub(crate) use bail;
