use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants fall into two families: contract violations (bad shapes, out of
/// range indices, degenerate inputs) and IO/format failures. The CLI maps the
/// first family to exit code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for IO and file-format failures, false for contract and numerical errors.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::File { .. } | Error::UnsupportedFormat(_) | Error::Parse(_)
        )
    }

    /// Attach a path to a format error so the caller sees which file failed.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::UnsupportedFormat(m) | Error::Parse(m) => Error::File {
                path: path.into(),
                message: m,
            },
            other => other,
        }
    }
}
