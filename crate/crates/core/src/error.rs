use std::path::PathBuf;

use crate::mpc::ControlPlan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty schedule")]
    EmptySchedule,

    #[error("curve has no response in the requested direction (span {span:.4} °C)")]
    FlatCurve { span: f64 },

    #[error("curve is not monotone after the delay: sample at t={at:.1} min deviates by {deviation:.3} °C")]
    NotMonotone { at: f64, deviation: f64 },

    #[error("unsettled curve: the 98% crossing lies inside the final plateau window")]
    UnsettledCurve,

    #[error("non-finite plant state")]
    NonFiniteState,

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("model direction {model:?} does not match requested {requested:?}")]
    DirectionMismatch {
        model: crate::fos::Direction,
        requested: crate::fos::Direction,
    },

    #[error("solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<ControlPlan>,
    },

    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
