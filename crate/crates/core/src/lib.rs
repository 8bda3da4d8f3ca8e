//! Diverse result subsets over an M-tree: dissimilarity and coverage under a radius,
//! with incremental zooming and the usual baselines for comparison.

// Radius checks are written `!(r > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod data;
pub mod disc;
pub mod error;
pub mod metrics;
pub mod mtree;
pub mod oracle;
pub mod zoom;

pub use error::{Error, Result};
pub use metrics::{Coords, Dataset, Metric, Point, PointKind};
pub use mtree::{MTree, MTreeConfig};
