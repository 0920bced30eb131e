use thiserror::Error;

use crate::dataset::DatasetError;
use crate::detection::DetectError;
use crate::dialog::DataError;
use crate::gateway::GatewayError;
use crate::rewriting::RewriteError;

/// Failures of the metric functions. These are data problems, not faults.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("item {index} has no references")]
    NoReferences { index: usize },
    #[error("{id}: second reference missing")]
    MissingSecondReference { id: String },
    #[error("{id}: no hypothesis to evaluate")]
    MissingHypothesis { id: String },
    #[error("{id}: gold label missing")]
    MissingLabel { id: String },
    #[error("id {id:?} present on one side only")]
    IdMismatch { id: String },
    #[error("no gold positives; AUPR is undefined")]
    NoPositives,
    #[error("no labeled items")]
    NoLabeledItems,
}

/// Any failure surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the root cause is a remote service failure.
    pub fn is_remote(&self) -> bool {
        matches!(
            self,
            Error::Gateway(_)
                | Error::Rewrite(RewriteError::Turn { .. } | RewriteError::Batch(_))
                | Error::Detect(DetectError::Scorer(_))
        )
    }
}
