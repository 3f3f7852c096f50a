use std::path::PathBuf;

/// Errors produced by the reduction toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter {xi:?} outside the domain: {reason}")]
    DomainViolation { xi: Vec<f64>, reason: String },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("inf-sup failure in {stage}: condition estimate {cond:.3e}")]
    InfSup { stage: String, cond: f64 },

    #[error("degenerate test space: {0}")]
    DegenerateTestSpace(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("empty sample: {0}")]
    EmptySample(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
