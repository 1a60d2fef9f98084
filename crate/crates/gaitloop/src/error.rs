//! Crate-wide error type.
//!
//! Data problems name the offending file, row, or column so a bad trial in a
//! large corpus can be found without a debugger. Numeric failures (divergence,
//! non-finite values) are kept separate from data errors so callers can map
//! them to distinct process exit codes.

use std::path::PathBuf;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// I/O failure with the path that caused it.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input data; `location` is a file plus a 1-based row where
    /// that makes sense (the header line is row 1).
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Structurally valid input that violates a documented requirement
    /// (negative force, non-monotone time, missing trial, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Shape or length mismatch between two things that must agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A sliding window was asked for output before it held enough frames.
    #[error("insufficient history: window holds {have} of {need} frames")]
    InsufficientHistory { have: usize, need: usize },

    /// Bad configuration value (zero rate, empty grid, horizon too short, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A stored model cannot be used with the data or settings at hand.
    #[error("incompatible model: {0}")]
    Incompatible(String),

    /// A model file is corrupt, truncated, or has an unsupported version.
    #[error("model file error: {0}")]
    ModelFormat(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    /// A numeric result that must be finite was not.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Parse error helper; `location` is typically `"file.csv:17"`.
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad math.
    /// The CLI maps these to a dedicated exit code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::InvalidData(_)
                | Error::Dimension(_)
                | Error::Incompatible(_)
                | Error::ModelFormat(_)
        )
    }

    /// True for numeric failures (divergence, NaN/inf).
    pub fn is_numeric_error(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
