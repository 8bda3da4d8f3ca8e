//! Solvers for dissimilar-and-covering subsets (and covering-only subsets) over an
//! M-tree, plus the brute-force verifier.
//!
//! Selection ties are broken by larger neighborhood count, then smaller id. N_r(p)
//! never contains p itself.

mod state;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtree::{AccessCounter, MTree, QueryMode};

pub use state::{CandidateQueue, Color, Coloring};
pub(crate) use state::{Probe, Run};
pub use verify::{addable, conflicts, uncovered, verify, Verification};

/// How Greedy-DisC refreshes white-neighborhood sizes after a selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyVariant {
    /// One query of radius r per newly grey object.
    Grey,
    /// One query of radius 2r around the selected object.
    White,
    /// As `Grey` with radius r/2; counts may stay too high.
    LazyGrey,
    /// As `White` with radius 3r/2; counts may stay too high.
    LazyWhite,
}

impl GreedyVariant {
    pub const ALL: [GreedyVariant; 4] =
        [GreedyVariant::Grey, GreedyVariant::White, GreedyVariant::LazyGrey, GreedyVariant::LazyWhite];

    pub fn update_radius(self, r: f64) -> f64 {
        match self {
            GreedyVariant::Grey => r,
            GreedyVariant::White => 2.0 * r,
            GreedyVariant::LazyGrey => r / 2.0,
            GreedyVariant::LazyWhite => 1.5 * r,
        }
    }

    pub fn is_lazy(self) -> bool {
        matches!(self, GreedyVariant::LazyGrey | GreedyVariant::LazyWhite)
    }

    fn name(self) -> &'static str {
        match self {
            GreedyVariant::Grey => "grey-greedy",
            GreedyVariant::White => "white-greedy",
            GreedyVariant::LazyGrey => "lazy-grey-greedy",
            GreedyVariant::LazyWhite => "lazy-white-greedy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Basic { pruned: bool },
    Greedy { variant: GreedyVariant, pruned: bool },
    GreedyC,
    FastC,
}

impl Algorithm {
    pub const GREEDY: Algorithm = Algorithm::Greedy { variant: GreedyVariant::Grey, pruned: false };

    /// Every algorithm, pruned forms included.
    pub fn all() -> Vec<Algorithm> {
        let mut out = vec![Algorithm::Basic { pruned: false }, Algorithm::Basic { pruned: true }];
        for variant in GreedyVariant::ALL {
            out.push(Algorithm::Greedy { variant, pruned: false });
            out.push(Algorithm::Greedy { variant, pruned: true });
        }
        out.extend([Algorithm::GreedyC, Algorithm::FastC]);
        out
    }

    /// Whether outputs must also be independent.
    pub fn is_disc(self) -> bool {
        !matches!(self, Algorithm::GreedyC | Algorithm::FastC)
    }

    pub fn is_pruned(self) -> bool {
        match self {
            Algorithm::Basic { pruned } | Algorithm::Greedy { pruned, .. } => pruned,
            Algorithm::GreedyC => false,
            Algorithm::FastC => true,
        }
    }

    /// The same algorithm with pruning switched off, where that is a separate form.
    pub fn unpruned(self) -> Algorithm {
        match self {
            Algorithm::Basic { .. } => Algorithm::Basic { pruned: false },
            Algorithm::Greedy { variant, .. } => Algorithm::Greedy { variant, pruned: false },
            other => other,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (base, pruned) = match *self {
            Algorithm::Basic { pruned } => ("basic", pruned),
            Algorithm::Greedy { variant, pruned } => (variant.name(), pruned),
            Algorithm::GreedyC => ("greedy-c", false),
            Algorithm::FastC => ("fast-c", false),
        };
        f.write_str(base)?;
        if pruned {
            f.write_str("-pruned")?;
        }
        Ok(())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        let (base, pruned) = match s.strip_suffix("-pruned") {
            Some(b) => (b, true),
            None => (s.as_str(), false),
        };
        let greedy = |variant| Ok(Algorithm::Greedy { variant, pruned });
        match base {
            "basic" | "basic-disc" => Ok(Algorithm::Basic { pruned }),
            "greedy" | "grey-greedy" | "greedy-disc" => greedy(GreedyVariant::Grey),
            "white-greedy" => greedy(GreedyVariant::White),
            "lazy-grey-greedy" => greedy(GreedyVariant::LazyGrey),
            "lazy-white-greedy" => greedy(GreedyVariant::LazyWhite),
            "greedy-c" if !pruned => Ok(Algorithm::GreedyC),
            "fast-c" if !pruned => Ok(Algorithm::FastC),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm `{s}`"))),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

/// A selected subset in selection order, with the radius it was computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiverseSubset {
    pub radius: f64,
    pub ids: Vec<usize>,
    pub algorithm: String,
    /// Node accesses spent by the run.
    pub access_cost: u64,
    #[serde(default)]
    pub distance_computations: u64,
}

impl DiverseSubset {
    pub fn new(radius: f64, ids: Vec<usize>, algorithm: impl Into<String>, counter: AccessCounter) -> Self {
        DiverseSubset {
            radius,
            ids,
            algorithm: algorithm.into(),
            access_cost: counter.node_accesses,
            distance_computations: counter.distance_computations,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn sorted_ids(&self) -> Vec<usize> {
        let mut ids = self.ids.clone();
        ids.sort_unstable();
        ids
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Query direction for every algorithm but Fast-C, which always climbs bottom-up.
    pub query_mode: QueryMode,
}

pub(crate) fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRadius(r))
    }
}

pub fn solve(tree: &MTree, r: f64, algorithm: Algorithm) -> Result<DiverseSubset> {
    solve_with_state(tree, r, algorithm, SolveOptions::default()).map(|(s, _)| s)
}

/// Runs `algorithm` and also returns the final coloring, which zooming can continue from.
pub fn solve_with_state(
    tree: &MTree,
    r: f64,
    algorithm: Algorithm,
    opts: SolveOptions,
) -> Result<(DiverseSubset, Coloring)> {
    solve_observed(tree, r, algorithm, opts, &mut |_, _| {})
}

/// As [`solve_with_state`], calling `observer` after every selection with the state
/// and the object just selected.
pub fn solve_observed(
    tree: &MTree,
    r: f64,
    algorithm: Algorithm,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&Coloring, usize),
) -> Result<(DiverseSubset, Coloring)> {
    check_radius(r)?;
    let mut run = Run::new(tree, r, Coloring::new(tree, r));
    match algorithm {
        Algorithm::Basic { pruned } => {
            run.chain_pass(Probe::new(opts.query_mode, pruned), |c| c == Color::White, observer)
        }
        Algorithm::Greedy { variant, pruned } => {
            let probe = Probe::new(opts.query_mode, pruned);
            run.count_neighbors(r, probe, |c| c == Color::White, |c| c == Color::White);
            let mut queue = CandidateQueue::new(tree.data().len());
            for id in 0..tree.data().len() {
                queue.upsert(id, run.count(id), 0);
            }
            greedy_whites(&mut run, &mut queue, variant, probe, observer);
        }
        Algorithm::GreedyC => greedy_cover(&mut run, Probe::new(opts.query_mode, false), observer),
        Algorithm::FastC => {
            let probe = Probe { mode: QueryMode::BottomUp, prune: true, stop_at_grey: true };
            greedy_cover(&mut run, probe, observer)
        }
    }
    let (ids, state, counter) = run.into_parts();
    Ok((DiverseSubset::new(r, ids, algorithm.to_string(), counter), state))
}

/// Greedy selection among white queue members until no white object remains. Shared
/// by Greedy-DisC, Greedy-Zoom-In and the second zoom-out pass.
pub(crate) fn greedy_whites(
    run: &mut Run<'_>,
    queue: &mut CandidateQueue,
    variant: GreedyVariant,
    probe: Probe,
    observer: &mut dyn FnMut(&Coloring, usize),
) {
    let upd = variant.update_radius(run.r);
    let white_style = matches!(variant, GreedyVariant::White | GreedyVariant::LazyWhite);
    while let Some(p) = queue.pop() {
        if run.color(p) != Color::White {
            continue;
        }
        let query_radius = if white_style { upd.max(run.r) } else { run.r };
        run.cover(p, query_radius, probe, false);
        let fresh = std::mem::take(&mut run.fresh);
        for &g in &fresh {
            queue.remove(g);
        }
        if white_style {
            // Each remaining white object within the query radius loses one per newly
            // grey neighbor.
            let ring = std::mem::take(&mut run.ring);
            for &u in &ring {
                if run.color(u) != Color::White {
                    continue;
                }
                run.counter.distance_computations += fresh.len() as u64;
                let lost = fresh.iter().filter(|&&g| run.tree.dist(u, g) <= run.r).count() as u32;
                if lost > 0 {
                    run.decrement(u, lost);
                    queue.update(u, run.count(u), 0);
                }
            }
            run.ring = ring;
        } else {
            run.subtract_around(&fresh, upd, probe, queue, |c| c == Color::White, |_| 0);
        }
        run.fresh = fresh;
        observer(&run.state, p);
    }
}

/// Greedy-C and Fast-C: white and grey objects compete on how many white objects they
/// would newly cover (themselves included when white). White wins ties.
fn greedy_cover(run: &mut Run<'_>, probe: Probe, observer: &mut dyn FnMut(&Coloring, usize)) {
    let n = run.tree.data().len();
    run.count_neighbors(run.r, Probe::new(probe.mode, false), |_| true, |c| c == Color::White);
    let gain = |run: &Run<'_>, id: usize| run.count(id) + u32::from(run.color(id) == Color::White);
    let tier = |c: Color| u8::from(c != Color::White);
    let mut queue = CandidateQueue::new(n);
    for id in 0..n {
        queue.upsert(id, gain(run, id), 0);
    }
    while run.state.whites() > 0 {
        let Some(p) = queue.pop() else { break };
        let was_white = run.color(p) == Color::White;
        if !run.cover(p, run.r, probe, true) {
            // A grey candidate whose counter was stale: it covers nothing new.
            continue;
        }
        let mut lost = std::mem::take(&mut run.fresh);
        if was_white {
            lost.push(p);
        }
        for &c in &lost {
            let hits = run.probe(c, run.r, probe);
            for &(u, _) in &hits {
                if u != c && run.color(u) != Color::Black {
                    run.decrement(u, 1);
                    let g = gain(run, u);
                    queue.update(u, g, tier(run.color(u)));
                }
            }
            run.recycle(hits);
        }
        for &c in &lost {
            if c != p {
                let g = gain(run, c);
                queue.update(c, g, 1);
            }
        }
        if probe.prune {
            // Pruned queries never reach a grey leaf again, so its objects' counters
            // would go stale; they stop being candidates.
            for &c in &lost {
                let leaf = run.tree.leaf_of(c).expect("indexed");
                if run.state.shade().is_grey(leaf) {
                    for e in run.tree.leaf_entries(leaf) {
                        queue.remove(e.object);
                    }
                }
            }
        }
        lost.retain(|&c| c != p);
        run.fresh = lost;
        observer(&run.state, p);
    }
}

pub fn basic_disc(tree: &MTree, r: f64, pruned: bool) -> Result<DiverseSubset> {
    solve(tree, r, Algorithm::Basic { pruned })
}

pub fn greedy_disc(tree: &MTree, r: f64, variant: GreedyVariant, pruned: bool) -> Result<DiverseSubset> {
    solve(tree, r, Algorithm::Greedy { variant, pruned })
}

pub fn greedy_c(tree: &MTree, r: f64) -> Result<DiverseSubset> {
    solve(tree, r, Algorithm::GreedyC)
}

pub fn fast_c(tree: &MTree, r: f64) -> Result<DiverseSubset> {
    solve(tree, r, Algorithm::FastC)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::data::{gen_clustered, gen_uniform};
    use crate::metrics::{Dataset, Metric};
    use crate::mtree::MTreeConfig;

    fn tree(data: Dataset, metric: Metric, capacity: usize) -> MTree {
        MTree::build(Arc::new(data), metric, MTreeConfig::with_capacity(capacity)).unwrap()
    }

    fn brute_white_count(tree: &MTree, state: &Coloring, u: usize, r: f64) -> u32 {
        (0..tree.data().len()).filter(|&q| q != u && state.color(q) == Color::White && tree.dist(u, q) <= r).count()
            as u32
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::all() {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Algorithm>(&json).unwrap(), a);
        }
        assert_eq!("greedy".parse::<Algorithm>().unwrap(), Algorithm::GREEDY);
        assert!("fast-c-pruned".parse::<Algorithm>().is_err());
        assert!("quick".parse::<Algorithm>().is_err());
    }

    #[test]
    fn single_point() {
        let t = tree(Dataset::numeric(vec![vec![0.3, 0.3]]).unwrap(), Metric::Euclidean, 50);
        for a in Algorithm::all() {
            assert_eq!(solve(&t, 0.1, a).unwrap().ids, vec![0], "{a}");
        }
    }

    #[test]
    fn radius_at_diameter_yields_one_object() {
        let data = gen_uniform(300, 2, 5).unwrap();
        let diam = data.diameter(Metric::Euclidean);
        let t = tree(data, Metric::Euclidean, 8);
        let first_leaf_object = t.leaf_iter().next().unwrap().object;
        assert_eq!(basic_disc(&t, diam, false).unwrap().ids, vec![first_leaf_object]);
        for a in Algorithm::all() {
            assert_eq!(solve(&t, diam, a).unwrap().len(), 1, "{a}");
        }
        // Everyone has n-1 neighbors, so the greedy pick is the smallest id.
        assert_eq!(greedy_disc(&t, diam, GreedyVariant::Grey, false).unwrap().ids, vec![0]);
    }

    #[test]
    fn negative_radius_rejected() {
        let t = tree(gen_uniform(5, 2, 0).unwrap(), Metric::Euclidean, 4);
        assert!(matches!(solve(&t, -0.1, Algorithm::GREEDY), Err(Error::InvalidRadius(_))));
        assert!(solve(&t, f64::NAN, Algorithm::GreedyC).is_err());
    }

    #[test]
    fn star_picks_hub_first() {
        // Hub at the origin, four satellites at distance 0.1 pairwise ~0.141 apart.
        let rows = vec![vec![0.6, 0.5], vec![0.5, 0.5], vec![0.5, 0.6], vec![0.4, 0.5], vec![0.5, 0.4]];
        let t = tree(Dataset::numeric(rows).unwrap(), Metric::Euclidean, 4);
        for variant in GreedyVariant::ALL {
            let s = greedy_disc(&t, 0.1, variant, false).unwrap();
            assert_eq!(s.ids, vec![1], "{variant:?}");
        }
        assert_eq!(greedy_c(&t, 0.1).unwrap().ids, vec![1]);
    }

    #[test]
    fn every_algorithm_verifies_on_clustered_data() {
        let data = gen_clustered(2000, 2, 6, 3).unwrap();
        let t = tree(data, Metric::Euclidean, 16);
        for r in [0.01, 0.05, 0.2] {
            for a in Algorithm::all() {
                let s = solve(&t, r, a).unwrap();
                let v = verify(t.data(), Metric::Euclidean, &s.ids, r).unwrap();
                assert!(v.coverage, "{a} at {r}");
                if a.is_disc() {
                    assert!(v.independence, "{a} at {r}");
                    assert!(addable(t.data(), Metric::Euclidean, &s.ids, r).unwrap().is_empty());
                }
                let mut sorted = s.sorted_ids();
                sorted.dedup();
                assert_eq!(sorted.len(), s.len());
            }
        }
    }

    #[test]
    fn pruning_changes_cost_not_output() {
        let data = gen_uniform(3000, 2, 11).unwrap();
        let t = tree(data, Metric::Euclidean, 20);
        for r in [0.01, 0.03] {
            for a in Algorithm::all().into_iter().filter(|a| a.is_pruned() && a.is_disc()) {
                let pruned = solve(&t, r, a).unwrap();
                let plain = solve(&t, r, a.unpruned()).unwrap();
                assert_eq!(pruned.ids, plain.ids, "{a}");
                assert!(pruned.access_cost <= plain.access_cost, "{a}");
            }
        }
    }

    #[test]
    fn bottom_up_queries_give_identical_solutions() {
        let data = gen_clustered(1500, 2, 5, 2).unwrap();
        let t = tree(data, Metric::Euclidean, 12);
        let opts = SolveOptions { query_mode: QueryMode::BottomUp };
        for a in Algorithm::all().into_iter().filter(|a| *a != Algorithm::FastC) {
            let (bu, _) = solve_with_state(&t, 0.04, a, opts).unwrap();
            assert_eq!(bu.ids, solve(&t, 0.04, a).unwrap().ids, "{a}");
        }
    }

    #[test]
    fn build_time_counts_save_accesses_and_match() {
        let data = Arc::new(gen_uniform(2000, 2, 4).unwrap());
        let plain = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::default()).unwrap();
        let counted = MTree::build(data, Metric::Euclidean, MTreeConfig::default().counting(0.03)).unwrap();
        let a = greedy_disc(&plain, 0.03, GreedyVariant::Grey, false).unwrap();
        let b = greedy_disc(&counted, 0.03, GreedyVariant::Grey, false).unwrap();
        assert_eq!(a.ids, b.ids);
        assert!(b.access_cost < a.access_cost);
    }

    #[test]
    fn white_counts_stay_exact_for_non_lazy_variants() {
        let data = gen_clustered(400, 2, 4, 8).unwrap();
        let t = tree(data, Metric::Euclidean, 6);
        let r = 0.05;
        for variant in [GreedyVariant::Grey, GreedyVariant::White] {
            for pruned in [false, true] {
                let mut steps = 0;
                let mut check = |state: &Coloring, _: usize| {
                    steps += 1;
                    for u in 0..t.data().len() {
                        if state.color(u) == Color::White {
                            assert_eq!(state.count(u), brute_white_count(&t, state, u, r), "{variant:?} at {u}");
                        }
                    }
                };
                let alg = Algorithm::Greedy { variant, pruned };
                solve_observed(&t, r, alg, SolveOptions::default(), &mut check).unwrap();
                assert!(steps > 1);
            }
        }
    }

    #[test]
    fn lazy_counts_never_undercount() {
        let data = gen_uniform(500, 2, 9).unwrap();
        let t = tree(data, Metric::Euclidean, 8);
        let r = 0.06;
        for variant in [GreedyVariant::LazyGrey, GreedyVariant::LazyWhite] {
            let mut check = |state: &Coloring, _: usize| {
                for u in 0..t.data().len() {
                    if state.color(u) == Color::White {
                        assert!(state.count(u) >= brute_white_count(&t, state, u, r));
                    }
                }
            };
            let alg = Algorithm::Greedy { variant, pruned: true };
            solve_observed(&t, r, alg, SolveOptions::default(), &mut check).unwrap();
        }
    }

    #[test]
    fn grey_subtrees_hold_no_white_objects() {
        let data = gen_uniform(1500, 2, 2).unwrap();
        let t = tree(data, Metric::Euclidean, 10);
        let mut check = |state: &Coloring, _: usize| {
            for leaf in t.leaves() {
                if state.shade().is_grey(leaf) {
                    assert!(t.leaf_entries(leaf).iter().all(|e| !state.color(e.object).is_active()));
                }
            }
        };
        for a in [Algorithm::Basic { pruned: true }, Algorithm::FastC] {
            solve_observed(&t, 0.02, a, SolveOptions::default(), &mut check).unwrap();
        }
    }

    #[test]
    fn closest_black_is_exact_without_pruning() {
        let data = gen_clustered(800, 2, 5, 1).unwrap();
        let t = tree(data, Metric::Euclidean, 10);
        let r = 0.04;
        for a in [Algorithm::Basic { pruned: false }, Algorithm::GREEDY] {
            let (s, state) = solve_with_state(&t, r, a, SolveOptions::default()).unwrap();
            assert!(state.is_closest_black_exact());
            for q in 0..t.data().len() {
                let truth = s.ids.iter().map(|&b| t.dist(q, b)).fold(f64::INFINITY, f64::min);
                assert_eq!(state.closest_black(q), truth);
            }
        }
        let (_, pruned) = solve_with_state(&t, r, Algorithm::Basic { pruned: true }, SolveOptions::default()).unwrap();
        assert!(!pruned.is_closest_black_exact());
    }

    #[test]
    fn fast_c_on_a_single_leaf_matches_greedy_c() {
        let data = gen_uniform(40, 2, 6).unwrap();
        let t = tree(data, Metric::Euclidean, 50);
        assert_eq!(t.height(), 1);
        for r in [0.05, 0.1, 0.3] {
            assert_eq!(fast_c(&t, r).unwrap().ids, greedy_c(&t, r).unwrap().ids);
        }
    }

    #[test]
    fn hamming_solutions_verify() {
        let rows: Vec<Vec<String>> =
            (0..200).map(|i| (0..5).map(|j| format!("v{}", (i * (j + 3) / 7) % (j + 2))).collect()).collect();
        let t = tree(Dataset::categorical(&rows).unwrap(), Metric::Hamming, 10);
        for r in [1.0, 2.0, 3.0] {
            for a in Algorithm::all() {
                let s = solve(&t, r, a).unwrap();
                let v = verify(t.data(), Metric::Hamming, &s.ids, r).unwrap();
                assert!(v.coverage && (v.independence || !a.is_disc()), "{a} at {r}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solvers_are_valid_and_deterministic(
            seed in 0u64..10_000,
            n in 1usize..160,
            r in 0.0f64..0.5,
            capacity in 4usize..12,
            manhattan in any::<bool>(),
        ) {
            let metric = if manhattan { Metric::Manhattan } else { Metric::Euclidean };
            let t = tree(gen_uniform(n, 2, seed).unwrap(), metric, capacity);
            for a in Algorithm::all() {
                let s = solve(&t, r, a).unwrap();
                let v = verify(t.data(), metric, &s.ids, r).unwrap();
                prop_assert!(v.coverage, "{} uncovered", a);
                if a.is_disc() {
                    prop_assert!(v.independence, "{} not independent", a);
                }
                prop_assert_eq!(&s.ids, &solve(&t, r, a).unwrap().ids);
            }
        }
    }
}
