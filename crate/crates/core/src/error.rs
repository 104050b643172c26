use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the segmentation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid point: coordinates must be finite, got ({x}, {y}, {z})")]
    NonFinitePoint { x: f64, y: f64, z: f64 },

    #[error("invalid frame id: must be non-empty")]
    EmptyFrameId,

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no ground plane found: fewer than 3 points inside the ground band")]
    PlaneNotFound,

    #[error("candidate ground set is empty")]
    EmptyCandidates,

    #[error("prediction and ground truth share no keys")]
    DisjointDomains,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: cloud contains no valid points")]
    EmptyCloud { path: PathBuf },

    #[error("I/O error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
