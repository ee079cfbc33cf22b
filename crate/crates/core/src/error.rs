use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("endpoint {endpoint} is not aligned to a mesh of {bins} bins")]
    Misaligned { endpoint: f64, bins: usize },

    #[error("bin index {index} out of range 0..{bins}")]
    BinOutOfRange { index: usize, bins: usize },

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("input too large for exhaustive search: {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable tag used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidAction(_) => "invalid_action",
            Error::Misaligned { .. } => "misaligned",
            Error::BinOutOfRange { .. } => "bin_out_of_range",
            Error::UndefinedStatistic(_) => "undefined_statistic",
            Error::Numerical(_) => "numerical",
            Error::SizeGuard { .. } => "size_guard",
            Error::EmptyInput(_) => "empty_input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
