//! Adapting a diverse subset to a new radius without starting over.
//!
//! Zooming in keeps every member and adds objects whose closest member drifted out of
//! reach. Zooming out colors former members red, keeps a conflict-free selection of
//! them, then covers whatever is left from the remaining objects.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::disc::{self, check_radius, CandidateQueue, Color, Coloring, DiverseSubset, GreedyVariant, Probe, Run};
use crate::error::{Error, Result};
use crate::mtree::{AccessCounter, MTree, MTreeConfig, QueryOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ZoomVariant {
    /// Leaf-chain order.
    Plain,
    /// Zoom-in: largest white neighborhood first. Zoom-out: same as `GreedyA`.
    Greedy,
    /// Zoom-out: red objects with the most red neighbors first.
    GreedyA,
    /// Zoom-out: red objects with the fewest red neighbors first.
    GreedyB,
    /// Zoom-out: red objects with the most white neighbors first.
    GreedyC,
}

impl ZoomVariant {
    pub const OUT: [ZoomVariant; 4] =
        [ZoomVariant::Plain, ZoomVariant::GreedyA, ZoomVariant::GreedyB, ZoomVariant::GreedyC];
    pub const IN: [ZoomVariant; 2] = [ZoomVariant::Plain, ZoomVariant::Greedy];
}

impl fmt::Display for ZoomVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoomVariant::Plain => "plain",
            ZoomVariant::Greedy => "greedy",
            ZoomVariant::GreedyA => "greedy-a",
            ZoomVariant::GreedyB => "greedy-b",
            ZoomVariant::GreedyC => "greedy-c",
        })
    }
}

impl FromStr for ZoomVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "plain" => Ok(ZoomVariant::Plain),
            "greedy" => Ok(ZoomVariant::Greedy),
            "greedy-a" | "a" => Ok(ZoomVariant::GreedyA),
            "greedy-b" | "b" => Ok(ZoomVariant::GreedyB),
            "greedy-c" | "c" => Ok(ZoomVariant::GreedyC),
            other => Err(Error::InvalidZoom(format!("unknown zoom variant `{other}`"))),
        }
    }
}

impl TryFrom<String> for ZoomVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ZoomVariant> for String {
    fn from(v: ZoomVariant) -> String {
        v.to_string()
    }
}

/// Membership change between the base subset and the adapted one (ids ascending).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomDiff {
    pub kept: Vec<usize>,
    pub added: Vec<usize>,
    pub removed: Vec<usize>,
}

impl ZoomDiff {
    pub fn between(old: &[usize], new: &[usize]) -> Self {
        let old: BTreeSet<usize> = old.iter().copied().collect();
        let new: BTreeSet<usize> = new.iter().copied().collect();
        ZoomDiff {
            kept: old.intersection(&new).copied().collect(),
            added: new.difference(&old).copied().collect(),
            removed: old.difference(&new).copied().collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ZoomOutcome {
    pub subset: DiverseSubset,
    pub diff: ZoomDiff,
    /// Coloring at the new radius, ready for the next zoom.
    pub state: Coloring,
}

fn check_base(tree: &MTree, base: &DiverseSubset) -> Result<()> {
    check_radius(base.radius)?;
    let mut seen = vec![false; tree.data().len()];
    for &id in &base.ids {
        let slot = seen.get_mut(id).ok_or(Error::UnknownId(id))?;
        if *slot {
            return Err(Error::InvalidZoom(format!("object {id} listed twice in the base subset")));
        }
        *slot = true;
    }
    Ok(())
}

fn check_new_radius(r_new: f64) -> Result<()> {
    if r_new.is_finite() && r_new > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRadius(r_new))
    }
}

/// Zooms in or out depending on whether `r_new` is below or above the base radius.
/// The coloring needed for zooming in is rebuilt from `base`, and that work is counted.
pub fn zoom(tree: &MTree, base: &DiverseSubset, r_new: f64, variant: ZoomVariant) -> Result<ZoomOutcome> {
    check_base(tree, base)?;
    check_new_radius(r_new)?;
    if r_new < base.radius {
        let mut counter = AccessCounter::default();
        let state = Coloring::from_subset(tree, &base.ids, base.radius, &mut counter)?;
        let mut out = zoom_in_from(tree, state, base, r_new, variant)?;
        out.subset.access_cost += counter.node_accesses;
        out.subset.distance_computations += counter.distance_computations;
        Ok(out)
    } else if r_new > base.radius {
        zoom_out(tree, base, r_new, variant)
    } else {
        Err(Error::InvalidZoom(format!("new radius equals current radius {r_new}")))
    }
}

/// Recomputes closest-black distances for the black objects of `state`.
pub fn maintain_closest_black(tree: &MTree, state: &mut Coloring) -> AccessCounter {
    let mut counter = AccessCounter::default();
    state.refresh_closest_black(tree, &mut counter);
    counter
}

pub fn zoom_in(tree: &MTree, base: &DiverseSubset, r_new: f64, greedy: bool) -> Result<ZoomOutcome> {
    if !(r_new < base.radius) {
        return Err(Error::InvalidZoom(format!("zoom-in needs a radius below {}, got {r_new}", base.radius)));
    }
    let variant = if greedy { ZoomVariant::Greedy } else { ZoomVariant::Plain };
    zoom(tree, base, r_new, variant)
}

/// Zoom-in continuing from the coloring that produced `base`.
///
/// Members stay black. A non-member whose closest member is farther than `r_new`
/// becomes a candidate: `Plain` promotes such objects in leaf-chain order, `Greedy`
/// picks the one covering the most other candidates first.
pub fn zoom_in_from(
    tree: &MTree,
    mut state: Coloring,
    base: &DiverseSubset,
    r_new: f64,
    variant: ZoomVariant,
) -> Result<ZoomOutcome> {
    check_base(tree, base)?;
    check_new_radius(r_new)?;
    if !(r_new < base.radius) {
        return Err(Error::InvalidZoom(format!("zoom-in needs a radius below {}, got {r_new}", base.radius)));
    }
    let greedy = match variant {
        ZoomVariant::Plain => false,
        ZoomVariant::Greedy => true,
        other => return Err(Error::InvalidZoom(format!("variant {other} only applies to zooming out"))),
    };
    if state.colors().len() != tree.data().len() {
        return Err(Error::InvalidZoom("coloring belongs to a different dataset".into()));
    }

    let mut counter = AccessCounter::default();
    if !state.is_closest_black_exact() {
        state.refresh_closest_black(tree, &mut counter);
    }
    state.set_radius(r_new);
    let mut run = Run::new(tree, r_new, state);
    run.counter = counter;
    let probe = Probe::default();
    let uncovered = |run: &Run<'_>, id: usize| run.color(id) != Color::Black && run.state.closest_black(id) > r_new;

    if greedy {
        for leaf in tree.leaves() {
            run.counter.node_accesses += 1;
            for e in tree.leaf_entries(leaf) {
                if uncovered(&run, e.object) {
                    run.state.paint(tree, e.object, Color::White);
                }
            }
        }
        run.count_neighbors(r_new, probe, |c| c == Color::White, |c| c == Color::White);
        let mut queue = CandidateQueue::new(tree.data().len());
        for id in run.state.ids_with(Color::White) {
            queue.upsert(id, run.count(id), 0);
        }
        disc::greedy_whites(&mut run, &mut queue, GreedyVariant::Grey, probe, &mut |_, _| {});
    } else {
        for leaf in tree.leaves() {
            run.counter.node_accesses += 1;
            for e in tree.leaf_entries(leaf) {
                if uncovered(&run, e.object) {
                    run.cover(e.object, r_new, probe, false);
                }
            }
        }
    }

    let (added, state, counter) = run.into_parts();
    let mut ids = base.ids.clone();
    ids.extend(added);
    let name = if greedy { "greedy-zoom-in" } else { "zoom-in" };
    let diff = ZoomDiff::between(&base.ids, &ids);
    Ok(ZoomOutcome { subset: DiverseSubset::new(r_new, ids, name, counter), diff, state })
}

pub fn zoom_out(tree: &MTree, base: &DiverseSubset, r_new: f64, variant: ZoomVariant) -> Result<ZoomOutcome> {
    zoom_out_pinned(tree, base, r_new, variant, None)
}

/// Zoom-out; `pinned`, when given, is the first red object selected.
fn zoom_out_pinned(
    tree: &MTree,
    base: &DiverseSubset,
    r_new: f64,
    variant: ZoomVariant,
    pinned: Option<usize>,
) -> Result<ZoomOutcome> {
    check_base(tree, base)?;
    check_new_radius(r_new)?;
    if !(r_new > base.radius) {
        return Err(Error::InvalidZoom(format!("zoom-out needs a radius above {}, got {r_new}", base.radius)));
    }
    let n = tree.data().len();
    let mut state = Coloring::new(tree, r_new);
    for &id in &base.ids {
        state.paint(tree, id, Color::Red);
    }
    let mut run = Run::new(tree, r_new, state);
    let probe = Probe::default();
    let mut ignore = |_: &Coloring, _: usize| {};

    if let Some(p) = pinned {
        if run.color(p) != Color::Red {
            return Err(Error::FocusNotInBase(p));
        }
        run.cover(p, r_new, probe, false);
    }

    // First pass: decide the red objects.
    match variant {
        ZoomVariant::Plain => run.chain_pass(probe, |c| c == Color::Red, &mut ignore),
        ZoomVariant::Greedy | ZoomVariant::GreedyA | ZoomVariant::GreedyB | ZoomVariant::GreedyC => {
            let by_white = variant == ZoomVariant::GreedyC;
            let counted = move |c: Color| if by_white { c == Color::White } else { c == Color::Red };
            run.count_neighbors(r_new, probe, |c| c == Color::Red, counted);
            let mut was_member = vec![false; n];
            base.ids.iter().for_each(|&id| was_member[id] = true);
            let mut queue =
                if variant == ZoomVariant::GreedyB { CandidateQueue::ascending(n) } else { CandidateQueue::new(n) };
            for id in run.state.ids_with(Color::Red) {
                queue.upsert(id, run.count(id), 0);
            }
            while let Some(p) = queue.pop() {
                if run.color(p) != Color::Red {
                    continue;
                }
                run.cover(p, r_new, probe, false);
                let fresh = std::mem::take(&mut run.fresh);
                for &g in &fresh {
                    queue.remove(g);
                }
                // Counted objects that just turned grey no longer count for anyone.
                let lost: Vec<usize> = fresh.iter().copied().filter(|&g| was_member[g] != by_white).collect();
                run.subtract_around(&lost, r_new, probe, &mut queue, |c| c == Color::Red, |_| 0);
                run.fresh = fresh;
            }
        }
    }

    // Second pass: cover what the surviving members left uncovered.
    match variant {
        ZoomVariant::Plain => run.chain_pass(probe, |c| c == Color::White, &mut ignore),
        _ => {
            run.count_neighbors(r_new, probe, |c| c == Color::White, |c| c == Color::White);
            let mut queue = CandidateQueue::new(n);
            for id in run.state.ids_with(Color::White) {
                queue.upsert(id, run.count(id), 0);
            }
            disc::greedy_whites(&mut run, &mut queue, GreedyVariant::Grey, probe, &mut ignore);
        }
    }

    let (ids, state, counter) = run.into_parts();
    let name = match variant {
        ZoomVariant::Plain => "zoom-out".to_string(),
        ZoomVariant::Greedy => "greedy-zoom-out-a".to_string(),
        v => format!("greedy-zoom-out-{}", &v.to_string()[7..]),
    };
    let diff = ZoomDiff::between(&base.ids, &ids);
    Ok(ZoomOutcome { subset: DiverseSubset::new(r_new, ids, name, counter), diff, state })
}

/// What a local zoom changed and where it may disagree with the untouched remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalZoomReport {
    pub focus: usize,
    /// Objects handed to the local zoom (ascending, focus included).
    pub region: Vec<usize>,
    /// The local result at the new radius, in global ids.
    pub local: DiverseSubset,
    /// Verification of `local` against the region alone at the new radius.
    pub verification: disc::Verification,
    /// (local member, outside member) pairs within the new radius of each other.
    pub conflicts: Vec<(usize, usize)>,
    /// Objects outside the region that lost their only covering member.
    pub uncovered: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LocalZoomOutcome {
    /// Base members outside the region plus the local result. Keeps the base radius,
    /// which still applies everywhere outside the region.
    pub subset: DiverseSubset,
    pub diff: ZoomDiff,
    pub report: LocalZoomReport,
}

/// Zooms only around `focus`, a base member.
///
/// Zooming in works on the focus and its neighbors at the base radius. Zooming out
/// works on everything within `r_new` of the focus, since that is what the focus can
/// absorb; the focus itself always stays selected.
pub fn local_zoom(
    tree: &MTree,
    base: &DiverseSubset,
    focus: usize,
    r_new: f64,
    variant: ZoomVariant,
) -> Result<LocalZoomOutcome> {
    check_base(tree, base)?;
    check_new_radius(r_new)?;
    if !base.contains(focus) {
        return Err(Error::FocusNotInBase(focus));
    }
    let r = base.radius;
    if r_new == r {
        return Err(Error::InvalidZoom(format!("new radius equals current radius {r_new}")));
    }
    let zoom_in = r_new < r;
    let data = tree.data();
    let metric = tree.metric();

    let mut counter = AccessCounter::default();
    let mut hits = Vec::new();
    tree.query_object(focus, r.max(r_new), QueryOptions::default(), &mut counter, &mut hits);
    let mut region: Vec<usize> = hits.iter().map(|&(q, _)| q).collect();
    region.sort_unstable();

    let local_data = Arc::new(data.restrict(&region)?);
    let config = MTreeConfig { count_neighborhoods_at_build: false, ..tree.config().clone() };
    let local_tree = MTree::build(local_data.clone(), metric, config)?;
    let to_local = |g: usize| region.binary_search(&g).ok();
    let local_focus = to_local(focus).expect("focus lies in its own region");
    let local_base_ids: Vec<usize> = base.ids.iter().filter_map(|&g| to_local(g)).collect();
    let local_base = DiverseSubset::new(r, local_base_ids, base.algorithm.clone(), AccessCounter::default());

    let outcome = if zoom_in {
        zoom(&local_tree, &local_base, r_new, variant)?
    } else {
        zoom_out_pinned(&local_tree, &local_base, r_new, variant, Some(local_focus))?
    };
    let verification = disc::verify(&local_data, metric, &outcome.subset.ids, r_new)?;
    let local_ids: Vec<usize> = outcome.subset.ids.iter().map(|&l| region[l]).collect();
    counter.node_accesses += outcome.subset.access_cost;
    counter.distance_computations += outcome.subset.distance_computations;

    let in_region = |g: usize| to_local(g).is_some();
    let outside: Vec<usize> = base.ids.iter().copied().filter(|&g| !in_region(g)).collect();
    let mut merged = outside.clone();
    merged.extend(&local_ids);

    let mut conflicts = Vec::new();
    for &a in &local_ids {
        for &b in &outside {
            if data.dist(metric, a, b) <= r_new {
                conflicts.push((a, b));
            }
        }
    }
    let covered_by = |ids: &[usize], q: usize| ids.iter().any(|&s| s == q || data.dist(metric, q, s) <= r);
    let uncovered: Vec<usize> =
        (0..data.len()).filter(|&q| !in_region(q) && covered_by(&base.ids, q) && !covered_by(&merged, q)).collect();

    let direction = if zoom_in { "in" } else { "out" };
    let local = DiverseSubset {
        radius: r_new,
        ids: local_ids,
        algorithm: format!("local-{}", outcome.subset.algorithm),
        access_cost: outcome.subset.access_cost,
        distance_computations: outcome.subset.distance_computations,
    };
    let diff = ZoomDiff::between(&base.ids, &merged);
    let subset = DiverseSubset::new(r, merged, format!("local-zoom-{direction}"), counter);
    Ok(LocalZoomOutcome {
        subset,
        diff,
        report: LocalZoomReport { focus, region, local, verification, conflicts, uncovered },
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::{gen_clustered, gen_uniform};
    use crate::disc::{solve, solve_with_state, verify, Algorithm, SolveOptions};
    use crate::metrics::{annulus_independence_bound, Dataset, Metric};

    fn tree_of(data: Dataset, metric: Metric, capacity: usize) -> MTree {
        MTree::build(Arc::new(data), metric, MTreeConfig::with_capacity(capacity)).unwrap()
    }

    fn line(xs: &[f64]) -> Dataset {
        Dataset::numeric(xs.iter().map(|&x| vec![x, 0.0]).collect()).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in
            [ZoomVariant::Plain, ZoomVariant::Greedy, ZoomVariant::GreedyA, ZoomVariant::GreedyB, ZoomVariant::GreedyC]
        {
            assert_eq!(v.to_string().parse::<ZoomVariant>().unwrap(), v);
        }
        assert!("sideways".parse::<ZoomVariant>().is_err());
    }

    #[test]
    fn diff_partitions_old_and_new() {
        let d = ZoomDiff::between(&[1, 2, 3], &[3, 4, 1]);
        assert_eq!(d, ZoomDiff { kept: vec![1, 3], added: vec![4], removed: vec![2] });
    }

    #[test]
    fn collinear_zoom_in_adds_the_ends() {
        let t = tree_of(line(&[0.0, 0.4, 0.8]), Metric::Euclidean, 4);
        let base = solve(&t, 0.5, Algorithm::GREEDY).unwrap();
        assert_eq!(base.ids, vec![1]);
        for greedy in [false, true] {
            let out = zoom_in(&t, &base, 0.3, greedy).unwrap();
            assert_eq!(out.subset.sorted_ids(), vec![0, 1, 2]);
            assert_eq!(out.diff.added, vec![0, 2]);
        }
    }

    #[test]
    fn zoom_in_without_uncovered_objects_is_a_no_op() {
        let t = tree_of(line(&[0.0, 0.1, 0.2, 0.9]), Metric::Euclidean, 4);
        let base = solve(&t, 0.5, Algorithm::GREEDY).unwrap();
        assert_eq!(base.sorted_ids(), vec![0, 3]);
        let out = zoom_in(&t, &base, 0.25, true).unwrap();
        assert_eq!(out.subset.ids, base.ids);
        assert!(out.diff.added.is_empty() && out.diff.removed.is_empty());
    }

    #[test]
    fn zoom_out_to_the_diameter_keeps_one_base_member() {
        let data = gen_uniform(400, 2, 3).unwrap();
        let diam = data.diameter(Metric::Euclidean);
        let t = tree_of(data, Metric::Euclidean, 10);
        let base = solve(&t, 0.05, Algorithm::GREEDY).unwrap();
        for v in ZoomVariant::OUT {
            let out = zoom_out(&t, &base, diam, v).unwrap();
            assert_eq!(out.subset.len(), 1, "{v}");
            assert!(base.contains(out.subset.ids[0]), "{v}");
        }
    }

    #[test]
    fn evicted_member_leaves_a_region_to_recover() {
        // p1 at 0.0, p2 at 0.3, p3 at 0.9; p5 at 0.55 was covered only by p2.
        let t = tree_of(line(&[0.0, 0.3, 0.9, 0.15, 0.55]), Metric::Euclidean, 4);
        let base = DiverseSubset::new(0.26, vec![0, 1, 2], "given", AccessCounter::default());
        assert!(verify(t.data(), Metric::Euclidean, &base.ids, 0.26).unwrap().is_disc());
        let out = zoom_out(&t, &base, 0.32, ZoomVariant::Plain).unwrap();
        assert!(out.diff.removed.contains(&1));
        assert!(out.diff.added.contains(&4));
        assert!(verify(t.data(), Metric::Euclidean, &out.subset.ids, 0.32).unwrap().is_disc());
    }

    #[test]
    fn wrong_direction_or_radius_is_rejected() {
        let t = tree_of(line(&[0.0, 0.4, 0.8]), Metric::Euclidean, 4);
        let base = solve(&t, 0.5, Algorithm::GREEDY).unwrap();
        assert!(matches!(zoom_in(&t, &base, 0.6, false), Err(Error::InvalidZoom(_))));
        assert!(matches!(zoom_out(&t, &base, 0.4, ZoomVariant::Plain), Err(Error::InvalidZoom(_))));
        assert!(matches!(zoom(&t, &base, 0.5, ZoomVariant::Plain), Err(Error::InvalidZoom(_))));
        assert!(matches!(zoom(&t, &base, 0.0, ZoomVariant::Plain), Err(Error::InvalidRadius(_))));
        assert!(matches!(zoom(&t, &base, 0.2, ZoomVariant::GreedyB), Err(Error::InvalidZoom(_))));
        let dup = DiverseSubset::new(0.5, vec![1, 1], "given", AccessCounter::default());
        assert!(zoom(&t, &dup, 0.2, ZoomVariant::Plain).is_err());
        assert!(matches!(local_zoom(&t, &base, 0, 0.2, ZoomVariant::Plain), Err(Error::FocusNotInBase(0))));
    }

    #[test]
    fn maintained_closest_black_matches_brute_force() {
        let data = gen_clustered(600, 2, 4, 5).unwrap();
        let t = tree_of(data, Metric::Euclidean, 8);
        let (s, mut state) =
            solve_with_state(&t, 0.03, Algorithm::Basic { pruned: true }, SolveOptions::default()).unwrap();
        maintain_closest_black(&t, &mut state);
        for q in 0..t.data().len() {
            let truth = s.ids.iter().map(|&b| t.dist(q, b)).fold(f64::INFINITY, f64::min);
            assert_eq!(state.closest_black(q), truth);
        }
        let single = DiverseSubset::new(0.03, vec![7], "given", AccessCounter::default());
        let mut counter = AccessCounter::default();
        let lone = Coloring::from_subset(&t, &single.ids, 0.03, &mut counter).unwrap();
        assert_eq!(lone.closest_black(7), 0.0);
        for q in 0..t.data().len() {
            assert_eq!(lone.closest_black(q), t.dist(q, 7));
        }
    }

    #[test]
    fn continuing_from_solver_state_matches_rebuilt_state() {
        let data = gen_clustered(1200, 2, 5, 6).unwrap();
        let t = tree_of(data, Metric::Euclidean, 12);
        for alg in [Algorithm::GREEDY, Algorithm::Basic { pruned: true }] {
            let (base, state) = solve_with_state(&t, 0.05, alg, SolveOptions::default()).unwrap();
            for v in ZoomVariant::IN {
                let a = zoom_in_from(&t, state.clone(), &base, 0.03, v).unwrap();
                let b = zoom(&t, &base, 0.03, v).unwrap();
                assert_eq!(a.subset.ids, b.subset.ids);
            }
        }
    }

    #[test]
    fn zoom_chains_stay_valid() {
        let data = gen_clustered(1500, 2, 6, 9).unwrap();
        let t = tree_of(data, Metric::Euclidean, 12);
        let (mut cur, mut state) = solve_with_state(&t, 0.04, Algorithm::GREEDY, SolveOptions::default()).unwrap();
        for (r_new, v) in [
            (0.02, ZoomVariant::Greedy),
            (0.01, ZoomVariant::Plain),
            (0.05, ZoomVariant::GreedyC),
            (0.03, ZoomVariant::Greedy),
            (0.09, ZoomVariant::GreedyB),
        ] {
            let out = if r_new < cur.radius {
                zoom_in_from(&t, state, &cur, r_new, v).unwrap()
            } else {
                zoom_out(&t, &cur, r_new, v).unwrap()
            };
            assert!(verify(t.data(), Metric::Euclidean, &out.subset.ids, r_new).unwrap().is_disc());
            cur = out.subset;
            state = out.state;
        }
    }

    #[test]
    fn local_zoom_in_leaves_the_outside_alone() {
        let data = gen_clustered(800, 2, 4, 2).unwrap();
        let t = tree_of(data, Metric::Euclidean, 10);
        let base = solve(&t, 0.1, Algorithm::GREEDY).unwrap();
        let focus = base.ids[0];
        let out = local_zoom(&t, &base, focus, 0.04, ZoomVariant::Greedy).unwrap();
        let rep = &out.report;
        assert!(rep.verification.is_disc());
        assert!(rep.local.contains(focus));
        for &id in &base.ids {
            if rep.region.binary_search(&id).is_err() {
                assert!(out.subset.contains(id));
            }
        }
        for &id in &out.diff.added {
            assert!(t.dist(id, focus) <= 0.1);
        }
        assert!(out.diff.removed.is_empty());
        assert!(rep.uncovered.is_empty());
    }

    #[test]
    fn local_zoom_with_isolated_focus_is_a_no_op() {
        let t = tree_of(line(&[0.0, 0.1, 0.9]), Metric::Euclidean, 4);
        let base = solve(&t, 0.2, Algorithm::GREEDY).unwrap();
        assert!(base.contains(2));
        let out = local_zoom(&t, &base, 2, 0.05, ZoomVariant::Plain).unwrap();
        assert_eq!(out.subset.sorted_ids(), base.sorted_ids());
        assert_eq!(out.report.region, vec![2]);
    }

    #[test]
    fn local_zoom_out_absorbs_nearby_members() {
        let data = gen_uniform(600, 2, 14).unwrap();
        let t = tree_of(data, Metric::Euclidean, 10);
        let base = solve(&t, 0.05, Algorithm::GREEDY).unwrap();
        let focus = base.ids[3];
        let out = local_zoom(&t, &base, focus, 0.15, ZoomVariant::GreedyA).unwrap();
        assert_eq!(out.report.local.ids, vec![focus]);
        assert!(out.subset.contains(focus));
        for &gone in &out.diff.removed {
            assert!(t.dist(gone, focus) <= 0.15);
        }
        assert!(out.report.verification.is_disc());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zooms_are_valid_and_bounded(
            seed in 0u64..10_000,
            n in 2usize..120,
            r in 0.02f64..0.4,
            factor in 0.2f64..0.95,
            manhattan in any::<bool>(),
        ) {
            let metric = if manhattan { Metric::Manhattan } else { Metric::Euclidean };
            let t = tree_of(gen_uniform(n, 2, seed).unwrap(), metric, 6);
            let (base, state) = solve_with_state(&t, r, Algorithm::GREEDY, SolveOptions::default()).unwrap();
            let r_in = r * factor;
            let bound = annulus_independence_bound(metric, 2, r_in, r).unwrap();
            for v in ZoomVariant::IN {
                let out = zoom_in_from(&t, state.clone(), &base, r_in, v).unwrap();
                prop_assert!(verify(t.data(), metric, &out.subset.ids, r_in).unwrap().is_disc());
                prop_assert!(out.diff.removed.is_empty());
                prop_assert!(out.subset.len() as u64 <= bound * base.len() as u64);
            }
            let r_out = r / factor;
            let b = if manhattan { 7 } else { 5 };
            for v in ZoomVariant::OUT {
                let out = zoom_out(&t, &base, r_out, v).unwrap();
                prop_assert!(verify(t.data(), metric, &out.subset.ids, r_out).unwrap().is_disc());
                prop_assert!(out.diff.added.len() <= b * out.diff.removed.len());
            }
        }
    }
}
