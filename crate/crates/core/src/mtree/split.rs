use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};

/// Which two objects become the routing pivots of the two halves of a split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Promote {
    /// The overflowed node's own pivot and the entry farthest from it.
    MinOverlap,
    /// The two entries farthest from each other.
    MaxDistance,
    /// Two distinct entries drawn from the tree's seeded generator.
    Random,
}

/// How the remaining entries are distributed between the two new nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    ClosestPivot,
    Balanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SplitPolicy {
    pub promote: Promote,
    pub partition: Partition,
}

impl SplitPolicy {
    pub const MIN_OVERLAP: SplitPolicy =
        SplitPolicy { promote: Promote::MinOverlap, partition: Partition::ClosestPivot };
    pub const MAX_DISTANCE: SplitPolicy =
        SplitPolicy { promote: Promote::MaxDistance, partition: Partition::ClosestPivot };
    pub const MAX_DISTANCE_BALANCED: SplitPolicy =
        SplitPolicy { promote: Promote::MaxDistance, partition: Partition::Balanced };
    pub const RANDOM: SplitPolicy = SplitPolicy { promote: Promote::Random, partition: Partition::ClosestPivot };

    pub const PRESETS: [SplitPolicy; 4] =
        [Self::MIN_OVERLAP, Self::MAX_DISTANCE, Self::MAX_DISTANCE_BALANCED, Self::RANDOM];
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self::MIN_OVERLAP
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let promote = match self.promote {
            Promote::MinOverlap => "min-overlap",
            Promote::MaxDistance => "max-distance",
            Promote::Random => "random",
        };
        match self.partition {
            Partition::ClosestPivot => f.write_str(promote),
            Partition::Balanced => write!(f, "{promote}-balanced"),
        }
    }
}

impl FromStr for SplitPolicy {
    type Err = Error;

    /// Accepts `<promote>` or `<promote>-balanced`, e.g. `min-overlap`, `random-balanced`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('_', "-");
        let (promote, partition) = match s.strip_suffix("-balanced") {
            Some(p) => (p, Partition::Balanced),
            None => (s.as_str(), Partition::ClosestPivot),
        };
        let promote = match promote {
            "min-overlap" | "minoverlap" => Promote::MinOverlap,
            "max-distance" | "maxdistance" => Promote::MaxDistance,
            "random" => Promote::Random,
            other => return Err(Error::InvalidConfig(format!("unknown split policy `{other}`"))),
        };
        Ok(SplitPolicy { promote, partition })
    }
}

impl TryFrom<String> for SplitPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SplitPolicy> for String {
    fn from(p: SplitPolicy) -> String {
        p.to_string()
    }
}

/// Result of splitting an overflowed node: the two promoted pivot objects and, for each,
/// the positions (into the input slice) of the entries it receives.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    pub pivots: [usize; 2],
    pub groups: [Vec<usize>; 2],
}

/// Splits the entries of an overflowed node.
///
/// `items` are the representative objects of the entries (the indexed objects of a
/// leaf, or the routing pivots of an internal node). `node_pivot` is the routing
/// object of the overflowed node, absent for the root. Both groups are non-empty
/// whenever `items.len() >= 2`.
pub fn split_entries<R: Rng>(
    data: &Dataset,
    metric: Metric,
    node_pivot: Option<usize>,
    items: &[usize],
    policy: SplitPolicy,
    rng: &mut R,
) -> SplitOutcome {
    assert!(items.len() >= 2, "cannot split fewer than two entries");
    let dist = |a: usize, b: usize| data.dist(metric, a, b);

    let pivots = match policy.promote {
        Promote::MinOverlap => {
            let first = node_pivot.unwrap_or_else(|| medoid(items, &dist));
            let farthest = items
                .iter()
                .copied()
                .map(|o| (o, dist(first, o)))
                .fold((items[0], f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            [first, farthest]
        }
        Promote::MaxDistance => {
            let mut best = (items[0], items[1], f64::NEG_INFINITY);
            for (i, &a) in items.iter().enumerate() {
                for &b in &items[i + 1..] {
                    let d = dist(a, b);
                    if d > best.2 {
                        best = (a, b, d);
                    }
                }
            }
            [best.0, best.1]
        }
        Promote::Random => {
            let i = rng.random_range(0..items.len());
            let mut j = rng.random_range(0..items.len() - 1);
            if j >= i {
                j += 1;
            }
            [items[i], items[j]]
        }
    };

    let d0: Vec<f64> = items.iter().map(|&o| dist(pivots[0], o)).collect();
    let d1: Vec<f64> = items.iter().map(|&o| dist(pivots[1], o)).collect();

    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    match policy.partition {
        Partition::ClosestPivot => {
            for i in 0..items.len() {
                let side = if d0[i] < d1[i] {
                    0
                } else if d1[i] < d0[i] {
                    1
                } else if groups[0].len() <= groups[1].len() {
                    0
                } else {
                    1
                };
                groups[side].push(i);
            }
            for side in 0..2 {
                if groups[side].is_empty() {
                    let other = 1 - side;
                    let dd = if side == 0 { &d0 } else { &d1 };
                    let (pos, _) = groups[other]
                        .iter()
                        .enumerate()
                        .min_by(|a, b| dd[*a.1].total_cmp(&dd[*b.1]))
                        .expect("other group holds every entry");
                    let moved = groups[other].remove(pos);
                    groups[side].push(moved);
                }
            }
        }
        Partition::Balanced => {
            let mut taken = vec![false; items.len()];
            let mut side = 0;
            for _ in 0..items.len() {
                let dd = if side == 0 { &d0 } else { &d1 };
                let pick = (0..items.len())
                    .filter(|&i| !taken[i])
                    .min_by(|&a, &b| dd[a].total_cmp(&dd[b]))
                    .expect("remaining entry");
                taken[pick] = true;
                groups[side].push(pick);
                side = 1 - side;
            }
        }
    }
    SplitOutcome { pivots, groups }
}

fn medoid(items: &[usize], dist: &impl Fn(usize, usize) -> f64) -> usize {
    items
        .iter()
        .copied()
        .map(|a| (a, items.iter().map(|&b| dist(a, b)).sum::<f64>()))
        .fold((items[0], f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::numeric(xs.iter().map(|&x| vec![x, 0.0]).collect()).unwrap()
    }

    #[test]
    fn min_overlap_on_a_line_picks_extremes() {
        let data = line(&[0.0, 0.1, 0.2, 0.3, 0.7, 0.8, 0.9, 1.0]);
        let items: Vec<usize> = (0..8).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Node pivot at the left end: the farthest entry is the right end.
        let out = split_entries(&data, Metric::Euclidean, Some(0), &items, SplitPolicy::MIN_OVERLAP, &mut rng);
        assert_eq!(out.pivots, [0, 7]);
        assert_eq!(out.groups[0], vec![0, 1, 2, 3]);
        assert_eq!(out.groups[1], vec![4, 5, 6, 7]);
        // Balls around the two pivots do not overlap.
        let r0 = out.groups[0].iter().map(|&i| data.dist(Metric::Euclidean, 0, i)).fold(0.0, f64::max);
        let r1 = out.groups[1].iter().map(|&i| data.dist(Metric::Euclidean, 7, i)).fold(0.0, f64::max);
        assert!(r0 + r1 < data.dist(Metric::Euclidean, 0, 7));
    }

    #[test]
    fn max_distance_on_a_line_picks_extremes() {
        let data = line(&[0.4, 0.0, 0.6, 1.0, 0.5]);
        let items: Vec<usize> = (0..5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = split_entries(&data, Metric::Euclidean, None, &items, SplitPolicy::MAX_DISTANCE, &mut rng);
        assert_eq!(out.pivots, [1, 3]);
    }

    #[test]
    fn balanced_partition_sizes_differ_by_at_most_one() {
        let data = line(&[0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 1.0]);
        let items: Vec<usize> = (0..7).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = split_entries(&data, Metric::Euclidean, None, &items, SplitPolicy::MAX_DISTANCE_BALANCED, &mut rng);
        let (a, b) = (out.groups[0].len(), out.groups[1].len());
        assert_eq!(a + b, 7);
        assert!(a.abs_diff(b) <= 1);
    }

    #[test]
    fn random_promote_replays_with_seed() {
        let data = line(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let items: Vec<usize> = (0..7).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            split_entries(&data, Metric::Euclidean, None, &items, SplitPolicy::RANDOM, &mut rng)
        };
        let a = run(42);
        assert_eq!(a, run(42));
        assert_ne!(a.pivots[0], a.pivots[1]);
    }

    #[test]
    fn duplicates_still_yield_two_nonempty_groups() {
        let data = line(&[0.5; 6]);
        let items: Vec<usize> = (0..6).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for policy in SplitPolicy::PRESETS {
            let out = split_entries(&data, Metric::Euclidean, None, &items, policy, &mut rng);
            assert!(!out.groups[0].is_empty() && !out.groups[1].is_empty(), "{policy}");
            assert_eq!(out.groups[0].len() + out.groups[1].len(), 6);
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for policy in SplitPolicy::PRESETS {
            assert_eq!(policy.to_string().parse::<SplitPolicy>().unwrap(), policy);
        }
        assert!("sideways".parse::<SplitPolicy>().is_err());
    }
}
