use thiserror::Error;

use crate::metrics::{Metric, PointKind};

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: PointKind, found: PointKind },

    #[error("metric {metric} is not defined for {kind} points")]
    MetricKind { metric: Metric, kind: PointKind },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid radius {0}")]
    InvalidRadius(f64),

    #[error("unknown object id {0}")]
    UnknownId(usize),

    #[error("k = {k} out of range for {n} objects")]
    KOutOfRange { k: usize, n: usize },

    #[error("instance too large for exact search: {size} > {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error("leaf node {0} still holds white objects")]
    LeafHasWhite(usize),

    #[error("invalid zoom: {0}")]
    InvalidZoom(String),

    #[error("object {0} is not a member of the base subset")]
    FocusNotInBase(usize),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
