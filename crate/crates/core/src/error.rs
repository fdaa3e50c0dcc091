use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates one of its invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error:\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Adaptive quadrature gave up before meeting the requested tolerance.
    #[error("quadrature did not converge: estimated error {achieved:e} exceeds requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    /// Zero coupling: the correlator never decays.
    #[error("correlation length is infinite (coupling = 0)")]
    InfiniteCorrelationLength,
}

impl Error {
    /// Short machine-readable category, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParams(_) => "params",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Quadrature { .. } => "numerical",
            Error::Fit(_) => "numerical",
            Error::InfiniteCorrelationLength => "numerical",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// One problem found while parsing or validating a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, when the problem is tied to a line.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}
