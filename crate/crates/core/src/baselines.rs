//! Fixed-size diversifiers to compare against, and the measures used to compare them.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::disc::{solve, Algorithm};
use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};
use crate::mtree::{MTree, MTreeConfig};
use crate::oracle;

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > data.len() {
        Err(Error::KOutOfRange { k, n: data.len() })
    } else {
        Ok(())
    }
}

fn check_ids(data: &Dataset, ids: &[usize]) -> Result<()> {
    match ids.iter().find(|&&id| id >= data.len()) {
        Some(&id) => Err(Error::UnknownId(id)),
        None => Ok(()),
    }
}

/// The pair at maximum distance, lexicographically least among ties.
fn farthest_pair(data: &Dataset, metric: Metric) -> (usize, usize) {
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for a in 0..data.len() {
        for b in a + 1..data.len() {
            let d = data.dist(metric, a, b);
            if d > best.0 {
                best = (d, a, b);
            }
        }
    }
    (best.1, best.2)
}

/// Grows a selection from the farthest pair, each step adding the object that scores
/// highest under `merge` (smallest id on ties).
fn greedy_grow(
    data: &Dataset,
    metric: Metric,
    k: usize,
    init: f64,
    merge: impl Fn(f64, f64) -> f64,
) -> Result<Vec<usize>> {
    metric.check(data.kind())?;
    check_k(data, k)?;
    let n = data.len();
    if n == 1 {
        return Ok(vec![0]);
    }
    let (a, b) = farthest_pair(data, metric);
    let mut chosen = vec![a, b];
    chosen.truncate(k);
    let mut taken = vec![false; n];
    let mut score = vec![init; n];
    for &c in &chosen {
        taken[c] = true;
        for (q, s) in score.iter_mut().enumerate() {
            *s = merge(*s, data.dist(metric, q, c));
        }
    }
    while chosen.len() < k {
        let mut best: Option<usize> = None;
        for q in (0..n).filter(|&q| !taken[q]) {
            if best.is_none_or(|b| score[q] > score[b]) {
                best = Some(q);
            }
        }
        let c = best.expect("k <= n leaves a candidate");
        taken[c] = true;
        chosen.push(c);
        for (q, s) in score.iter_mut().enumerate() {
            *s = merge(*s, data.dist(metric, q, c));
        }
    }
    Ok(chosen)
}

/// Greedy MaxMin: farthest pair first, then the object farthest from its nearest pick.
pub fn greedy_maxmin(data: &Dataset, metric: Metric, k: usize) -> Result<Vec<usize>> {
    greedy_grow(data, metric, k, f64::INFINITY, f64::min)
}

/// Greedy MaxSum: farthest pair first, then the object with the largest summed
/// distance to the picks.
pub fn greedy_maxsum(data: &Dataset, metric: Metric, k: usize) -> Result<Vec<usize>> {
    greedy_grow(data, metric, k, 0.0, |s, d| s + d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMedoids {
    pub medoids: Vec<usize>,
    /// Mean distance of every object to its nearest medoid.
    pub cost: f64,
    /// Cost after the build phase and after each accepted swap.
    pub history: Vec<f64>,
}

/// Nearest and second-nearest medoid distances, plus the index (into `medoids`) of
/// the nearest.
fn assign(data: &Dataset, metric: Metric, medoids: &[usize]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = data.len();
    let (mut near, mut d1, mut d2) = (vec![0; n], vec![f64::INFINITY; n], vec![f64::INFINITY; n]);
    for q in 0..n {
        for (i, &m) in medoids.iter().enumerate() {
            let d = data.dist(metric, q, m);
            if d < d1[q] {
                d2[q] = d1[q];
                d1[q] = d;
                near[q] = i;
            } else if d < d2[q] {
                d2[q] = d;
            }
        }
    }
    (near, d1, d2)
}

/// PAM: greedy build, then the best improving swap until none is left. `seed` shuffles
/// the candidate order, which only matters for ties.
pub fn k_medoids(data: &Dataset, metric: Metric, k: usize, seed: u64) -> Result<KMedoids> {
    k_medoids_with(data, metric, k, seed, usize::MAX)
}

pub fn k_medoids_with(data: &Dataset, metric: Metric, k: usize, seed: u64, max_swaps: usize) -> Result<KMedoids> {
    metric.check(data.kind())?;
    check_k(data, k)?;
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    // Build: add the object that lowers the total the most.
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best = (f64::INFINITY, usize::MAX);
        for &c in order.iter().filter(|&&c| !is_medoid[c]) {
            let total: f64 = (0..n).map(|q| nearest[q].min(data.dist(metric, q, c))).sum();
            if total < best.0 {
                best = (total, c);
            }
        }
        let c = best.1;
        is_medoid[c] = true;
        medoids.push(c);
        for (q, near) in nearest.iter_mut().enumerate() {
            *near = near.min(data.dist(metric, q, c));
        }
    }

    let mean = |d1: &[f64]| d1.iter().sum::<f64>() / n as f64;
    let (mut near, mut d1, mut d2) = assign(data, metric, &medoids);
    let mut history = vec![mean(&d1)];
    let tolerance = 1e-12 * n as f64;
    let mut delta = vec![0.0; k];
    while history.len() <= max_swaps {
        // Swap medoid i for candidate x: every object pays min(d(o,x), d1) - d1, and
        // the objects served by i pay the difference to their second-nearest medoid.
        let mut best = (-tolerance, usize::MAX, usize::MAX);
        for &x in order.iter().filter(|&&x| !is_medoid[x]) {
            delta.iter_mut().for_each(|v| *v = 0.0);
            let mut shared = 0.0;
            for o in 0..n {
                let d = data.dist(metric, o, x);
                shared += d.min(d1[o]) - d1[o];
                delta[near[o]] += d.min(d2[o]) - d.min(d1[o]);
            }
            for (i, &di) in delta.iter().enumerate() {
                if shared + di < best.0 {
                    best = (shared + di, i, x);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let (_, i, x) = best;
        is_medoid[medoids[i]] = false;
        is_medoid[x] = true;
        medoids[i] = x;
        (near, d1, d2) = assign(data, metric, &medoids);
        history.push(mean(&d1));
    }
    Ok(KMedoids { medoids, cost: *history.last().unwrap(), history })
}

/// `1 - |a ∩ b| / |a ∪ b|`; two empty sets are identical.
pub fn jaccard_distance(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(&b).count() as f64 / union as f64
}

pub fn f_min(data: &Dataset, metric: Metric, ids: &[usize]) -> f64 {
    oracle::min_pairwise(data, metric, ids)
}

pub fn f_sum(data: &Dataset, metric: Metric, ids: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            total += data.dist(metric, a, b);
        }
    }
    total
}

/// JSON has no infinity; write it as `null`.
mod infinite_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub size: usize,
    /// Smallest pairwise distance; infinite below two members.
    #[serde(with = "infinite_as_null")]
    pub f_min: f64,
    pub f_sum: f64,
    /// Mean distance from each object to its nearest member; infinite when empty.
    #[serde(with = "infinite_as_null")]
    pub medoid_cost: f64,
    /// Share of objects that are members or lie within `r` of one.
    pub coverage_fraction: f64,
    pub radius: f64,
    /// Jaccard distance to the reference subset; absent when none was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<f64>,
    /// `f_min` is undefined for this subset.
    pub degenerate: bool,
}

pub fn quality(
    data: &Dataset,
    metric: Metric,
    ids: &[usize],
    r: f64,
    reference: Option<&[usize]>,
) -> Result<QualityReport> {
    metric.check(data.kind())?;
    check_ids(data, ids)?;
    if let Some(reference) = reference {
        check_ids(data, reference)?;
    }
    let n = data.len();
    let mut member = vec![false; n];
    ids.iter().for_each(|&s| member[s] = true);
    let mut total = 0.0;
    let mut covered = 0;
    for (q, &is_member) in member.iter().enumerate() {
        let d =
            if is_member { 0.0 } else { ids.iter().map(|&s| data.dist(metric, q, s)).fold(f64::INFINITY, f64::min) };
        total += d;
        if d <= r {
            covered += 1;
        }
    }
    let f_min = f_min(data, metric, ids);
    Ok(QualityReport {
        size: ids.len(),
        f_min,
        f_sum: f_sum(data, metric, ids),
        medoid_cost: if ids.is_empty() { f64::INFINITY } else { total / n.max(1) as f64 },
        coverage_fraction: if n == 0 { 1.0 } else { covered as f64 / n as f64 },
        radius: r,
        jaccard: reference.map(|b| jaccard_distance(ids, b)),
        degenerate: !f_min.is_finite(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMinRatio {
    /// Size of the diverse subset, reused as the MaxMin budget.
    pub k: usize,
    #[serde(with = "infinite_as_null")]
    pub lambda: f64,
    #[serde(with = "infinite_as_null")]
    pub lambda_star: f64,
    pub ok: bool,
}

/// Compares the spread of a greedy diverse subset at radius `r` with the best spread
/// any subset of the same size can reach; the latter is at most three times the former.
pub fn check_maxmin_ratio(data: &Dataset, metric: Metric, r: f64) -> Result<MaxMinRatio> {
    if data.len() > oracle::MAX_MAXMIN_N {
        return Err(Error::InstanceTooLarge { size: data.len(), limit: oracle::MAX_MAXMIN_N });
    }
    let tree = MTree::build(Arc::new(data.clone()), metric, MTreeConfig::default())?;
    let s = solve(&tree, r, Algorithm::GREEDY)?;
    let lambda = f_min(data, metric, &s.ids);
    let best = oracle::optimal_maxmin(data, metric, s.len())?;
    let lambda_star = f_min(data, metric, &best);
    Ok(MaxMinRatio { k: s.len(), lambda, lambda_star, ok: lambda_star <= 3.0 * lambda })
}
