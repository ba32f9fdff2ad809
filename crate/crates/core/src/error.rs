use thiserror::Error;

/// Errors surfaced by the library. Construction-time validation failures and
/// runtime contract violations both land here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("convention mismatch: expected {expected}, spec declares {found}")]
    ConventionMismatch { expected: &'static str, found: &'static str },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("chain aborted: {0}")]
    ChainAborted(String),

    #[error("sampling oracle failed: {0}")]
    OracleFailure(String),

    #[error("config error(s):\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One schema/validation failure with the config path that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, e.g. `target.beta`.
    pub path: String,
    pub message: String,
    /// 1-based line number when the error is tied to a source location.
    pub line: Option<usize>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "{} (line {}): {}", self.path, line, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
