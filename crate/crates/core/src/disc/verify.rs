//! Index-free checks of the two diversity conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    /// Every object is a member or lies within `r` of one.
    pub coverage: bool,
    /// Members are pairwise farther apart than `r`.
    pub independence: bool,
}

impl Verification {
    pub fn is_disc(&self) -> bool {
        self.coverage && self.independence
    }
}

fn check_ids(data: &Dataset, metric: Metric, ids: &[usize]) -> Result<()> {
    metric.check(data.kind())?;
    match ids.iter().find(|&&id| id >= data.len()) {
        Some(&id) => Err(Error::UnknownId(id)),
        None => Ok(()),
    }
}

/// Brute-force check in `O(n·|S|)`.
pub fn verify(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Result<Verification> {
    check_ids(data, metric, ids)?;
    Ok(Verification {
        coverage: first_uncovered(data, metric, ids, r).is_none(),
        independence: first_conflict(data, metric, ids, r).is_none(),
    })
}

fn first_uncovered(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Option<usize> {
    (0..data.len()).find(|&q| !ids.iter().any(|&s| s == q || data.dist(metric, q, s) <= r))
}

fn first_conflict(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Option<(usize, usize)> {
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if data.dist(metric, a, b) <= r {
                return Some((a, b));
            }
        }
    }
    None
}

/// Objects with no member within `r`.
pub fn uncovered(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Result<Vec<usize>> {
    check_ids(data, metric, ids)?;
    let mut member = vec![false; data.len()];
    ids.iter().for_each(|&s| member[s] = true);
    Ok((0..data.len()).filter(|&q| !member[q] && !ids.iter().any(|&s| data.dist(metric, q, s) <= r)).collect())
}

/// Member pairs within distance `r` of each other.
pub fn conflicts(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Result<Vec<(usize, usize)>> {
    check_ids(data, metric, ids)?;
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if data.dist(metric, a, b) <= r {
                out.push((a.min(b), a.max(b)));
            }
        }
    }
    Ok(out)
}

/// Members that could be added without breaking independence. Empty exactly when the
/// independent set `ids` is maximal.
pub fn addable(data: &Dataset, metric: Metric, ids: &[usize], r: f64) -> Result<Vec<usize>> {
    check_ids(data, metric, ids)?;
    let mut member = vec![false; data.len()];
    ids.iter().for_each(|&s| member[s] = true);
    Ok((0..data.len()).filter(|&q| !member[q] && ids.iter().all(|&s| data.dist(metric, q, s) > r)).collect())
}
