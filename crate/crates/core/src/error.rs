use thiserror::Error;

use crate::domain::{ObsId, PointId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature: {0}")]
    InvalidFeature(String),
    #[error("speed of {0} is undefined for a single-point history")]
    UndefinedSpeed(ObsId),
    #[error("{0} has no ground-plane positions")]
    MissingGroundPosition(ObsId),
    #[error("gate precondition violated: {0}")]
    GatePrecondition(String),
    #[error("transition {0}->{1} has no mean/std")]
    MissingTransitionStats(PointId, PointId),
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("ingestion error: {0}")]
    Ingest(String),
    #[error("unknown observation {0}")]
    UnknownObservation(ObsId),
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("graph too large for exhaustive search: {0} vertices (limit {1})")]
    GraphTooLarge(usize, usize),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("evaluation precondition violated: {0}")]
    Evaluation(String),
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that indicate a defect rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Consistency(_))
    }
}
