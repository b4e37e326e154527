use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("sensor {sensor}: channel estimate is zero, cannot compensate")]
    DegenerateEstimate { sensor: usize },

    #[error("sensor {sensor}: value {value} is not strictly positive (floor {floor})")]
    NonPositiveValue { sensor: usize, value: f64, floor: f64 },

    #[error("degenerate regressor: E(x^2) - E(x)^2 = {spread:e} is below tolerance {tolerance:e}")]
    DegenerateRegressor { spread: f64, tolerance: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed csv: {message}", path.display())]
    Csv { path: PathBuf, message: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } | Error::Csv { .. } => 4,
            _ => 3,
        }
    }
}
