//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text (dates, numbers) at a boundary.
    #[error("{0}")]
    Parse(String),

    /// Invalid model, seasonality, Fourier or run configuration.
    #[error("{0}")]
    Config(String),

    /// Input value outside the domain of an operation.
    #[error("{0}")]
    Domain(String),

    /// Index outside the parameter arrays.
    #[error("{0}")]
    Index(String),

    /// Data file content problems (duplicates, bad rows).
    #[error("{0}")]
    Data(String),

    /// Degenerate input such as a constant series.
    #[error("{0}")]
    Degenerate(String),

    /// Non-finite objective at the starting point of an optimization.
    #[error("{0}")]
    Initialization(String),

    /// Non-finite values produced during a numerical computation.
    #[error("{0}")]
    Numerical(String),

    /// Posterior curvature unusable for a Laplace approximation.
    #[error("{0}")]
    Curvature(String),

    /// Not enough data to lay out the requested folds.
    #[error("{0}")]
    Planning(String),

    /// Imported forecast dates do not cover the evaluation dates.
    #[error("{0}")]
    Alignment(String),

    /// Violated calling contract (e.g. empty draws).
    #[error("{0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Index(_) => "index",
            Error::Data(_) => "data",
            Error::Degenerate(_) => "degenerate",
            Error::Initialization(_) => "initialization",
            Error::Numerical(_) => "numerical",
            Error::Curvature(_) => "curvature",
            Error::Planning(_) => "planning",
            Error::Alignment(_) => "alignment",
            Error::Contract(_) => "contract",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
