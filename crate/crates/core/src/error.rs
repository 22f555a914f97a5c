use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input or parameter failed validation.
    #[error("{0}")]
    Invalid(String),

    /// A parameter outside its admissible range, named.
    #[error("parameter `{name}`: {msg}")]
    Param { name: &'static str, msg: String },

    #[error("signal has no power")]
    NoPower,

    #[error("COLA violated: overlap-add window sum varies by {spread:.3e} at hop {hop}")]
    ColaViolated { hop: usize, spread: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("diverged; reduce lr")]
    Diverged,

    #[error("integration diverged")]
    IntegrationDiverged,

    #[error("resample: one class absent")]
    OneClassAbsent,

    #[error("bad {format} data: {msg}")]
    Format { format: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::Param {
            name,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
