// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Errors produced by the estimators, detectors, oracles and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("detector error: {0}")]
    Detector(String),
    #[error("increase horizon_cap: {hits} of {reps} replications reached the cap of {cap} frames")]
    HorizonCap { hits: usize, reps: usize, cap: usize },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no metrics requested")]
    NoMetrics,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
