use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {message}")]
    Format { path: PathBuf, row: usize, message: String },

    #[error("integrity error in `{series}`: {message}")]
    Integrity { series: String, message: String },

    #[error("series `{series}` starts {first} after the grid ends {grid_end}")]
    Coverage {
        series: String,
        first: NaiveDate,
        grid_end: NaiveDate,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration did not converge after {evaluations} evaluations (best log-likelihood {best_loglik})")]
    Calibration {
        evaluations: usize,
        best_loglik: f64,
        best_params: Vec<f64>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("staging error: {0}")]
    Staging(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
