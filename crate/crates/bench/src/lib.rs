//! Strong-scaling harness for `lqcd-core`: timed solves over rank counts,
//! reports shaped like the reference tables, consistency checks of the
//! bundled reference data and a fitted communication model.

pub mod config;
pub mod harness;
pub mod model;
pub mod paper;
pub mod record;

use lqcd_core::comm::CommError;
use lqcd_core::geometry::GeometryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("watchdog timeout: {0}")]
    Timeout(String),
    #[error(transparent)]
    Comm(CommError),
    #[error("solve failed: {0}")]
    SolveFailed(String),
    #[error("consistency violation: {}", .0.join("; "))]
    Consistency(Vec<String>),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<CommError> for BenchError {
    fn from(e: CommError) -> Self {
        match e {
            CommError::Timeout { stalled, waited } => BenchError::Timeout(format!("{stalled} for {waited:?}")),
            other => BenchError::Comm(other),
        }
    }
}

impl BenchError {
    /// Process exit code: 1 usage, 2 consistency or solve failure, 3 timeout.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Timeout(_) => 3,
            BenchError::Geometry(_) | BenchError::InvalidConfig(_) | BenchError::Parse(_) => 1,
            BenchError::Model(model::ModelError::InvalidParams(_)) => 1,
            _ => 2,
        }
    }
}
