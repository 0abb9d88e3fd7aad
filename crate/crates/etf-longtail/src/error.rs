//! Library-wide error type.

/// Errors surfaced by every module. The CLI maps these onto exit codes
/// (config 2, data format 3, numeric contract 4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or parameter combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input data (feature files, stats files).
    #[error("data format error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format {
        msg: String,
        /// 1-based line number for text formats, byte offset for binary.
        line: Option<u64>,
    },

    /// A numeric precondition or invariant was violated.
    #[error("numeric contract violation: {0}")]
    Contract(String),

    /// Evaluation requested outside the angular validity window.
    #[error("theta {theta} outside validity window ({lo}, {hi})")]
    Window { theta: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format { msg: msg.into(), line: None }
    }

    pub(crate) fn format_at(msg: impl Into<String>, line: u64) -> Self {
        Error::Format { msg: msg.into(), line: Some(line) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
