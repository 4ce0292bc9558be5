use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error(
        "domain too small at t = {t}: support radius {radius:.6} reaches half-width {half_width}"
    )]
    DomainTooSmall { t: f64, radius: f64, half_width: f64 },

    #[error("scheme unstable at t = {t} (step {step}): value {value:e} at cell {cell}")]
    Unstable {
        t: f64,
        step: usize,
        cell: usize,
        value: f64,
    },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (estimate {estimate})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("{0}")]
    Insufficient(String),

    #[error("eta continuation is not converging: {0}")]
    NotConverging(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed table {path}: {reason}")]
    Table { path: PathBuf, reason: String },

    #[error("empty report list")]
    EmptyReport,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
