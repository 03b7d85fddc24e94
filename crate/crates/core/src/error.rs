use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    ParseLine { line: usize, message: String },

    #[error("parse error at byte offset {offset}: {message}")]
    ParseOffset { offset: usize, message: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    #[error("the sun never rises over the requested season")]
    NoSun,

    #[error("no voxel absorbed any light")]
    DegenerateLight,

    #[error("cut {index} at ({x:.3}, {y:.3}, {z:.3}) matches no graph node")]
    EmptyCut { index: usize, x: f64, y: f64, z: f64 },

    #[error("prune removes the entire tree")]
    DegeneratePrune,

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("no reference points should have been removed; recall is undefined")]
    UndefinedRecall,

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable code, used in CLI and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ParseLine { .. } | Error::ParseOffset { .. } => "parse_error",
            Error::EmptyCloud => "empty_cloud",
            Error::Parameter { .. } => "invalid_parameter",
            Error::NoSun => "no_sun",
            Error::DegenerateLight => "degenerate_light",
            Error::EmptyCut { .. } => "empty_cut",
            Error::DegeneratePrune => "degenerate_prune",
            Error::Consistency(_) => "consistency_error",
            Error::InvalidCut(_) => "invalid_cut",
            Error::UndefinedRecall => "undefined_recall",
            Error::Io { .. } => "io_error",
        }
    }
}
