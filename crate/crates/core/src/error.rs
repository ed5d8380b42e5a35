use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the simulation, bound and measure layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A step produced a non-finite state; the path is aborted rather than clamped.
    #[error("divergence at step {step} (t = {t}): state became {value}")]
    Divergence { step: usize, t: f64, value: f64 },

    /// A bound was requested outside the parameter region where it is claimed.
    #[error("bound not applicable: {0}")]
    NotApplicable(String),

    #[error("no finite radius found: {0}")]
    UnboundedInSample(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
