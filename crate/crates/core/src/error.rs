use std::path::PathBuf;

/// Errors produced by the regularity toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("training run aborted: {0}")]
    RunAborted(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
