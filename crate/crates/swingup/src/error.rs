//! Crate-wide error type and the process exit codes it maps to.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("version mismatch in {path}: found {found}, supported {supported}")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn shape(op: &'static str, details: impl Into<String>) -> Self {
        Error::Shape {
            op,
            details: details.into(),
        }
    }
}

/// Process exit code for an error: 2 bad arguments, 3 I/O failure,
/// 4 format or version mismatch, 5 numeric failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArg(_) | Error::Shape { .. } => 2,
        Error::Io { .. } => 3,
        Error::Format { .. } | Error::VersionMismatch { .. } => 4,
        Error::Numeric(_) => 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(exit_code(&Error::InvalidArg("x".into())), 2);
        assert_eq!(exit_code(&Error::shape("matmul", "2x3 vs 4x5")), 2);
        assert_eq!(
            exit_code(&Error::io("f", std::io::Error::from(std::io::ErrorKind::NotFound))),
            3
        );
        assert_eq!(exit_code(&Error::format("f", "bad magic")), 4);
        assert_eq!(
            exit_code(&Error::VersionMismatch {
                path: "f".into(),
                found: 9,
                supported: 1
            }),
            4
        );
        assert_eq!(exit_code(&Error::Numeric("diverged".into())), 5);
    }
}
