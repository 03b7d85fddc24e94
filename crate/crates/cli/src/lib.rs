//! Command implementations behind the `canopy` binary.

pub mod app;
pub mod commands;
pub mod config;

use serde::Serialize;

/// Machine-readable error, printed as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn from_error(err: &anyhow::Error) -> Self {
        Self {
            code: error_code(err).to_string(),
            message: format!("{err:#}"),
        }
    }
}

pub fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<canopy_core::Error>() {
            return e.code();
        }
        if cause.is::<toml::de::Error>() {
            return "invalid_config";
        }
        if cause.is::<std::io::Error>() {
            return "io_error";
        }
    }
    "error"
}
