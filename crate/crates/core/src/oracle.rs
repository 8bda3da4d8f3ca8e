//! Exhaustive solvers for small instances, used as ground truth by the tests.
//!
//! Graphs are bitmask adjacency lists, so at most 64 vertices; the exact searches
//! have tighter limits of their own.

use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};

pub const MAX_VERTICES: usize = 64;
pub const MAX_DOMINATING_N: usize = 20;
pub const MAX_ENUMERATION_N: usize = 16;
pub const MAX_MAXMIN_N: usize = 14;

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<u64>,
}

fn bit(v: usize) -> u64 {
    1u64 << v
}

fn full(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        bit(n) - 1
    }
}

fn members(mask: u64) -> Vec<usize> {
    (0..64).filter(|&v| mask & bit(v) != 0).collect()
}

fn too_large(size: usize, limit: usize) -> Result<()> {
    if size > limit {
        Err(Error::InstanceTooLarge { size, limit })
    } else {
        Ok(())
    }
}

impl Graph {
    pub fn new(n: usize) -> Result<Self> {
        too_large(n, MAX_VERTICES)?;
        Ok(Graph { adj: vec![0; n] })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::new(n)?;
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = Graph::new(n)?;
        for v in 0..n {
            g.adj[v] = full(n) & !bit(v);
        }
        Ok(g)
    }

    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.n();
        for v in [a, b] {
            if v >= n {
                return Err(Error::UnknownId(v));
            }
        }
        if a != b {
            self.adj[a] |= bit(b);
            self.adj[b] |= bit(a);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] & bit(b) != 0
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        members(self.adj[v])
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    fn closed(&self, v: usize) -> u64 {
        self.adj[v] | bit(v)
    }

    fn mask_of(&self, set: &[usize]) -> u64 {
        set.iter().filter(|&&v| v < self.n()).fold(0, |m, &v| m | bit(v))
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mask = self.mask_of(set);
        set.iter().all(|&v| v < self.n() && self.adj[v] & mask == 0)
    }

    pub fn is_dominating(&self, set: &[usize]) -> bool {
        let covered = set.iter().filter(|&&v| v < self.n()).fold(0, |m, &v| m | self.closed(v));
        covered == full(self.n())
    }

    /// Independent and no vertex can be added while staying so.
    pub fn is_maximal_independent(&self, set: &[usize]) -> bool {
        if !self.is_independent(set) {
            return false;
        }
        let mask = self.mask_of(set);
        (0..self.n()).all(|v| mask & bit(v) != 0 || self.adj[v] & mask != 0)
    }
}

/// Edge between two objects iff their distance is at most `r`.
pub fn build_disc_graph(data: &Dataset, metric: Metric, r: f64) -> Result<Graph> {
    metric.check(data.kind())?;
    let mut g = Graph::new(data.len())?;
    for a in 0..data.len() {
        for b in a + 1..data.len() {
            if data.dist(metric, a, b) <= r {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

/// Smallest dominating set, lexicographically least among those of minimum size.
pub fn min_dominating_set(g: &Graph) -> Result<Vec<usize>> {
    min_dominating(g, false)
}

/// Smallest independent dominating set, lexicographically least among the minima.
pub fn min_independent_dominating_set(g: &Graph) -> Result<Vec<usize>> {
    min_dominating(g, true)
}

fn min_dominating(g: &Graph, independent: bool) -> Result<Vec<usize>> {
    too_large(g.n(), MAX_DOMINATING_N)?;
    let n = g.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    // reach[i]: vertices dominated by some vertex >= i
    let mut reach = vec![0u64; n + 1];
    for i in (0..n).rev() {
        reach[i] = reach[i + 1] | g.closed(i);
    }
    let mut chosen = Vec::new();
    for k in 1..=n {
        if search_dominating(g, independent, &reach, k, 0, 0, 0, &mut chosen) {
            return Ok(chosen);
        }
    }
    unreachable!("the whole vertex set dominates and some maximal independent set exists")
}

#[allow(clippy::too_many_arguments)]
fn search_dominating(
    g: &Graph,
    independent: bool,
    reach: &[u64],
    left: usize,
    start: usize,
    picked: u64,
    covered: u64,
    chosen: &mut Vec<usize>,
) -> bool {
    let all = full(g.n());
    if covered == all {
        return true;
    }
    if left == 0 || covered | reach[start] != all {
        return false;
    }
    for v in start..g.n() {
        if independent && g.adj[v] & picked != 0 {
            continue;
        }
        if covered | reach[v] != all {
            break;
        }
        chosen.push(v);
        if search_dominating(g, independent, reach, left - 1, v + 1, picked | bit(v), covered | g.closed(v), chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Every maximal independent set, each ascending, in lexicographic order.
pub fn enumerate_maximal_independent_sets(g: &Graph) -> Result<Vec<Vec<usize>>> {
    too_large(g.n(), MAX_ENUMERATION_N)?;
    let n = g.n();
    let mut out: Vec<Vec<usize>> = (0..1u64 << n)
        .filter(|&mask| {
            let independent = (0..n).all(|v| mask & bit(v) == 0 || g.adj[v] & mask == 0);
            independent && (0..n).all(|v| mask & bit(v) != 0 || g.adj[v] & mask != 0)
        })
        .map(members)
        .collect();
    out.sort();
    Ok(out)
}

/// Size of a maximum independent set within the vertices of `mask`.
fn max_independent(g: &Graph, mask: u64) -> usize {
    if mask == 0 {
        return 0;
    }
    let v = mask.trailing_zeros() as usize;
    let inside = g.adj[v] & mask;
    let take = 1 + max_independent(g, mask & !inside & !bit(v));
    if inside == 0 {
        // An isolated vertex always belongs to some maximum set.
        return take;
    }
    take.max(max_independent(g, mask & !bit(v)))
}

/// Largest number of pairwise-independent objects found in any single neighborhood
/// within `r` (the object itself excluded).
pub fn max_independent_neighbors(data: &Dataset, metric: Metric, r: f64) -> Result<usize> {
    metric.check(data.kind())?;
    let mut best = 0;
    for p in 0..data.len() {
        let hood: Vec<usize> = (0..data.len()).filter(|&q| q != p && data.dist(metric, p, q) <= r).collect();
        too_large(hood.len(), MAX_VERTICES)?;
        let mut g = Graph::new(hood.len())?;
        for i in 0..hood.len() {
            for j in i + 1..hood.len() {
                if data.dist(metric, hood[i], hood[j]) <= r {
                    g.add_edge(i, j)?;
                }
            }
        }
        best = best.max(max_independent(&g, full(hood.len())));
    }
    Ok(best)
}

/// Smallest pairwise distance within `ids`; infinite for fewer than two objects.
pub fn min_pairwise(data: &Dataset, metric: Metric, ids: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            best = best.min(data.dist(metric, a, b));
        }
    }
    best
}

/// The `k`-subset with the largest minimum pairwise distance, lexicographically least
/// among ties.
pub fn optimal_maxmin(data: &Dataset, metric: Metric, k: usize) -> Result<Vec<usize>> {
    metric.check(data.kind())?;
    let n = data.len();
    too_large(n, MAX_MAXMIN_N)?;
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let dist: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| data.dist(metric, a, b)).collect()).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut cur = Vec::with_capacity(k);
    search_maxmin(&dist, k, 0, f64::INFINITY, &mut cur, &mut best);
    Ok(best.1)
}

fn search_maxmin(
    dist: &[Vec<f64>],
    k: usize,
    start: usize,
    current: f64,
    cur: &mut Vec<usize>,
    best: &mut (f64, Vec<usize>),
) {
    if cur.len() == k {
        if current > best.0 {
            *best = (current, cur.clone());
        }
        return;
    }
    let n = dist.len();
    for v in start..=n - (k - cur.len()) {
        let m = cur.iter().map(|&u| dist[u][v]).fold(current, f64::min);
        // Only a strictly better value can replace an earlier (smaller) subset.
        if m <= best.0 {
            continue;
        }
        cur.push(v);
        search_maxmin(dist, k, v + 1, m, cur, best);
        cur.pop();
    }
}
