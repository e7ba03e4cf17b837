use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, RtmError>;

/// All fallible operations in this crate report one of these variants.
#[derive(Debug, Error)]
pub enum RtmError {
    /// Underlying file I/O failure.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Structurally malformed input file (ragged rows, bad sparse indices).
    #[error("{}: row {row}: {message}", path.display())]
    Format {
        path: PathBuf,
        /// 1-based data row within the file.
        row: usize,
        message: String,
    },

    /// A cell or token could not be parsed as a number.
    #[error("{}: row {row}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    /// Value-level invariant violation: non-finite entries, out-of-range
    /// labels, hyper-parameters outside their domain.
    #[error("{0}")]
    Validation(String),

    /// Shape mismatch between related inputs.
    #[error("{0}")]
    Dimension(String),

    /// The evaluation protocol cannot proceed (e.g. unlabeled target domain).
    #[error("{0}")]
    Protocol(String),

    /// The regularized scatter matrix could not be factorized.
    #[error("matrix is not positive definite: leading minor of order {minor} is not positive")]
    Numeric {
        /// 1-based order of the first leading principal minor that failed.
        minor: usize,
    },

    /// Exact-enumeration limits exceeded.
    #[error("{0}")]
    Capacity(String),
}

impl RtmError {
    /// Wraps an I/O failure with the path it concerned.
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        RtmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        RtmError::Format {
            path: path.into(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        RtmError::Parse {
            path: path.into(),
            row,
            message: message.into(),
        }
    }
}
