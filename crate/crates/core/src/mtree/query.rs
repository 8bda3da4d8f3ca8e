use serde::{Deserialize, Serialize};

use super::{AccessCounter, Body, MTree, NodeId};
use crate::error::{Error, Result};
use crate::metrics::{Coords, Point};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    #[default]
    TopDown,
    /// Start at the leaf holding the center and climb towards the root.
    BottomUp,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QueryOptions<'a> {
    pub mode: QueryMode,
    /// Skip subtrees the shade marks grey.
    pub prune: Option<&'a NodeShade>,
    /// Bottom-up only: stop climbing at the first grey internal node.
    pub stop_at_grey: bool,
}

impl<'a> QueryOptions<'a> {
    pub fn top_down() -> Self {
        Self::default()
    }

    pub fn bottom_up() -> Self {
        QueryOptions { mode: QueryMode::BottomUp, ..Self::default() }
    }

    pub fn mode(mode: QueryMode) -> Self {
        QueryOptions { mode, ..Self::default() }
    }

    pub fn pruned(mut self, shade: &'a NodeShade) -> Self {
        self.prune = Some(shade);
        self
    }

    fn is_grey(&self, node: NodeId) -> bool {
        self.prune.is_some_and(|s| s.grey[node])
    }
}

// Relative slack on ball tests so rounding never prunes a subtree holding a hit.
#[inline]
fn loosen(x: f64) -> f64 {
    x * (1.0 + 1e-12) + 1e-12
}

impl MTree {
    /// Objects within distance `r` of `center`, the center itself included when indexed.
    pub fn range_query(
        &self,
        center: &Point,
        r: f64,
        opts: QueryOptions<'_>,
        counter: &mut AccessCounter,
    ) -> Result<Vec<usize>> {
        self.data.check_point(center)?;
        let start = match opts.mode {
            QueryMode::TopDown => None,
            QueryMode::BottomUp => {
                let indexed = self.leaf_of(center.id).filter(|_| self.data.points()[center.id].coords == center.coords);
                Some(indexed.ok_or(Error::UnknownId(center.id))?)
            }
        };
        let mut out = Vec::new();
        self.query_into(&center.coords, start, r, opts, counter, &mut out);
        Ok(out.into_iter().map(|(id, _)| id).collect())
    }

    /// Range query around indexed object `id`, returning `(object, distance)` pairs.
    pub(crate) fn query_object(
        &self,
        id: usize,
        r: f64,
        opts: QueryOptions<'_>,
        counter: &mut AccessCounter,
        out: &mut Vec<(usize, f64)>,
    ) {
        out.clear();
        let start = match opts.mode {
            QueryMode::TopDown => None,
            QueryMode::BottomUp => self.leaf_of(id),
        };
        self.query_into(&self.data.points()[id].coords, start, r, opts, counter, out);
    }

    pub(crate) fn query_into(
        &self,
        center: &Coords,
        start_leaf: Option<NodeId>,
        r: f64,
        opts: QueryOptions<'_>,
        counter: &mut AccessCounter,
        out: &mut Vec<(usize, f64)>,
    ) {
        if self.len == 0 {
            return;
        }
        match start_leaf {
            None => {
                if !opts.is_grey(self.root) {
                    self.descend(self.root, center, None, r, &opts, counter, out);
                }
            }
            Some(leaf) => self.climb(leaf, center, r, &opts, counter, out),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        node: NodeId,
        center: &Coords,
        pivot_dist: Option<f64>,
        r: f64,
        opts: &QueryOptions<'_>,
        counter: &mut AccessCounter,
        out: &mut Vec<(usize, f64)>,
    ) {
        counter.node_accesses += 1;
        let points = self.data.points();
        match &self.nodes[node].body {
            Body::Leaf(entries) => {
                for e in entries {
                    if let Some(dp) = pivot_dist {
                        if (dp - e.dist_to_parent).abs() > loosen(r) {
                            continue;
                        }
                    }
                    counter.distance_computations += 1;
                    let d = self.metric.raw(center, &points[e.object].coords);
                    if d <= r {
                        out.push((e.object, d));
                    }
                }
            }
            Body::Internal(entries) => {
                for e in entries {
                    if opts.is_grey(e.child) {
                        continue;
                    }
                    let reach = loosen(r + e.radius);
                    if let Some(dp) = pivot_dist {
                        if (dp - e.dist_to_parent).abs() > reach {
                            continue;
                        }
                    }
                    counter.distance_computations += 1;
                    let d = self.metric.raw(center, &points[e.pivot].coords);
                    if d <= reach {
                        self.descend(e.child, center, Some(d), r, opts, counter, out);
                    }
                }
            }
        }
    }

    fn climb(
        &self,
        leaf: NodeId,
        center: &Coords,
        r: f64,
        opts: &QueryOptions<'_>,
        counter: &mut AccessCounter,
        out: &mut Vec<(usize, f64)>,
    ) {
        if !opts.is_grey(leaf) {
            self.descend(leaf, center, None, r, opts, counter, out);
        }
        let points = self.data.points();
        let mut came_from = leaf;
        while let Some(node) = self.nodes[came_from].parent {
            if opts.stop_at_grey && opts.prune.is_some_and(|s| s.grey[node]) {
                break;
            }
            if !opts.is_grey(node) {
                counter.node_accesses += 1;
                let Body::Internal(entries) = &self.nodes[node].body else { unreachable!("parents are internal") };
                for e in entries {
                    if e.child == came_from || opts.is_grey(e.child) {
                        continue;
                    }
                    counter.distance_computations += 1;
                    let d = self.metric.raw(center, &points[e.pivot].coords);
                    if d <= loosen(r + e.radius) {
                        self.descend(e.child, center, Some(d), r, opts, counter, out);
                    }
                }
            }
            came_from = node;
        }
    }

    /// Overlap measure in `[0, 1]`: 0 when every point query touches one node per level,
    /// 1 when it touches every node.
    pub fn fat_factor(&self) -> f64 {
        let mut counter = AccessCounter::default();
        let mut sink = Vec::new();
        for p in self.data.points() {
            if !self.is_indexed(p.id) {
                continue;
            }
            sink.clear();
            self.query_into(&p.coords, None, 0.0, QueryOptions::default(), &mut counter, &mut sink);
        }
        super::fat_factor_from(counter.node_accesses, self.len, self.height, self.nodes.len())
    }
}

/// Grey/white state of tree nodes under the pruning rule. An object is *active* while
/// it is white (or red, during zoom-out). A leaf with no active objects is grey; an
/// internal node is grey when all of its children are.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeShade {
    grey: Vec<bool>,
    active_in_leaf: Vec<u32>,
}

impl NodeShade {
    pub fn new(tree: &MTree, is_active: impl Fn(usize) -> bool) -> Self {
        let mut shade = NodeShade { grey: vec![false; tree.nodes.len()], active_in_leaf: vec![0; tree.nodes.len()] };
        for leaf in tree.leaves() {
            shade.active_in_leaf[leaf] = tree.leaf_entries(leaf).iter().filter(|e| is_active(e.object)).count() as u32;
        }
        shade.recompute(tree);
        shade
    }

    /// Every node white, no active-object bookkeeping: pruning never triggers.
    pub fn all_white(tree: &MTree) -> Self {
        NodeShade::new(tree, |_| true)
    }

    fn recompute(&mut self, tree: &MTree) {
        fn visit(tree: &MTree, shade: &mut NodeShade, node: NodeId) -> bool {
            let grey = match &tree.nodes[node].body {
                Body::Leaf(_) => shade.active_in_leaf[node] == 0,
                Body::Internal(entries) => {
                    let mut all = true;
                    for e in entries {
                        all &= visit(tree, shade, e.child);
                    }
                    all
                }
            };
            shade.grey[node] = grey;
            grey
        }
        if tree.len > 0 {
            visit(tree, self, tree.root);
        }
    }

    pub fn is_grey(&self, node: NodeId) -> bool {
        self.grey[node]
    }

    pub fn grey_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.grey.iter().enumerate().filter(|(_, &g)| g).map(|(n, _)| n)
    }

    pub fn active_in_leaf(&self, leaf: NodeId) -> u32 {
        self.active_in_leaf[leaf]
    }

    /// Records that `object` stopped being active; greys its leaf (and ancestors) when
    /// the leaf has no active objects left.
    pub fn deactivate(&mut self, tree: &MTree, object: usize) {
        let Some(leaf) = tree.leaf_of(object) else { return };
        debug_assert!(self.active_in_leaf[leaf] > 0);
        self.active_in_leaf[leaf] -= 1;
        if self.active_in_leaf[leaf] == 0 {
            let _ = self.color_grey_upward(tree, leaf);
        }
    }

    /// Records that `object` became active again; whitens its leaf and ancestors.
    pub fn activate(&mut self, tree: &MTree, object: usize) {
        let Some(leaf) = tree.leaf_of(object) else { return };
        self.active_in_leaf[leaf] += 1;
        let mut node = Some(leaf);
        while let Some(n) = node {
            if !self.grey[n] {
                break;
            }
            self.grey[n] = false;
            node = tree.parent(n);
        }
    }

    /// Colors a leaf without active objects grey, then each ancestor whose children are
    /// all grey.
    pub fn color_grey_upward(&mut self, tree: &MTree, leaf: NodeId) -> Result<()> {
        if self.active_in_leaf[leaf] > 0 {
            return Err(Error::LeafHasWhite(leaf));
        }
        self.grey[leaf] = true;
        let mut node = tree.parent(leaf);
        while let Some(n) = node {
            if self.grey[n] || !tree.children(n).all(|c| self.grey[c]) {
                break;
            }
            self.grey[n] = true;
            node = tree.parent(n);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::gen_uniform;
    use crate::metrics::{Dataset, Metric};
    use crate::mtree::MTreeConfig;

    fn scan(data: &Dataset, metric: Metric, center: &Point, r: f64) -> Vec<usize> {
        data.points().iter().filter(|p| metric.raw(&center.coords, &p.coords) <= r).map(|p| p.id).collect()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn zero_radius_and_full_radius() {
        let data = Arc::new(gen_uniform(300, 2, 11).unwrap());
        let tree = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::with_capacity(6)).unwrap();
        let mut c = AccessCounter::default();
        let p = &data.points()[17];
        for mode in [QueryMode::TopDown, QueryMode::BottomUp] {
            let hits = tree.range_query(p, 0.0, QueryOptions::mode(mode), &mut c).unwrap();
            assert_eq!(hits, vec![17]);
            let all = tree.range_query(p, 2.0, QueryOptions::mode(mode), &mut c).unwrap();
            assert_eq!(sorted(all), (0..300).collect::<Vec<_>>());
        }
    }

    #[test]
    fn both_modes_match_linear_scan() {
        let data = Arc::new(gen_uniform(1000, 3, 5).unwrap());
        for metric in [Metric::Euclidean, Metric::Manhattan] {
            let tree = MTree::build(data.clone(), metric, MTreeConfig::with_capacity(10)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut c = AccessCounter::default();
            for _ in 0..100 {
                let p = &data.points()[rng.random_range(0..1000)];
                let r = rng.random_range(0.0..0.4);
                let expect = scan(&data, metric, p, r);
                for mode in [QueryMode::TopDown, QueryMode::BottomUp] {
                    let got = tree.range_query(p, r, QueryOptions::mode(mode), &mut c).unwrap();
                    assert_eq!(sorted(got), expect);
                }
            }
        }
    }

    #[test]
    fn external_center_and_errors() {
        let data = Arc::new(gen_uniform(200, 2, 2).unwrap());
        let tree = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::with_capacity(8)).unwrap();
        let mut c = AccessCounter::default();
        let probe = Point::numeric(999, vec![0.5, 0.5]);
        let got = tree.range_query(&probe, 0.2, QueryOptions::top_down(), &mut c).unwrap();
        assert_eq!(sorted(got), scan(&data, Metric::Euclidean, &probe, 0.2));
        assert!(tree.range_query(&probe, 0.2, QueryOptions::bottom_up(), &mut c).is_err());
        let wrong = Point::categorical(0, vec![1, 2]);
        assert!(tree.range_query(&wrong, 0.2, QueryOptions::top_down(), &mut c).is_err());
        let wrong_dim = Point::numeric(0, vec![0.1]);
        assert!(tree.range_query(&wrong_dim, 0.2, QueryOptions::top_down(), &mut c).is_err());
    }

    #[test]
    fn grey_upward_closure_matches_fixpoint() {
        let data = Arc::new(gen_uniform(600, 2, 21).unwrap());
        let tree = MTree::build(data, Metric::Euclidean, MTreeConfig::with_capacity(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut active = vec![true; 600];
        let mut shade = NodeShade::new(&tree, |_| true);
        let mut order: Vec<usize> = (0..600).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for (k, &o) in order.iter().enumerate() {
            active[o] = false;
            shade.deactivate(&tree, o);
            if k % 50 == 0 || k == 599 {
                let fresh = NodeShade::new(&tree, |i| active[i]);
                assert_eq!(shade, fresh, "after {k} deactivations");
            }
        }
        assert!(shade.is_grey(tree.root()));
        // Re-activating one object whitens its path to the root.
        shade.activate(&tree, order[0]);
        active[order[0]] = true;
        assert!(!shade.is_grey(tree.root()));
        assert_eq!(shade, NodeShade::new(&tree, |i| active[i]));
    }

    #[test]
    fn color_grey_upward_requires_an_inactive_leaf() {
        let data = Arc::new(gen_uniform(100, 2, 1).unwrap());
        let tree = MTree::build(data, Metric::Euclidean, MTreeConfig::with_capacity(4)).unwrap();
        let mut shade = NodeShade::new(&tree, |_| true);
        let leaf = tree.leaves().next().unwrap();
        assert!(matches!(shade.color_grey_upward(&tree, leaf), Err(Error::LeafHasWhite(_))));
        let mut shade_one_white = NodeShade::new(&tree, |i| i == 0);
        let white_leaf = tree.leaf_of(0).unwrap();
        for l in tree.leaves().filter(|&l| l != white_leaf).collect::<Vec<_>>() {
            shade_one_white.color_grey_upward(&tree, l).unwrap();
        }
        assert!(!shade_one_white.is_grey(tree.root()));
        shade = NodeShade::new(&tree, |_| false);
        assert!(shade.is_grey(tree.root()));
    }

    #[test]
    fn pruned_query_omits_only_grey_subtrees() {
        let data = Arc::new(gen_uniform(800, 2, 6).unwrap());
        let tree = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::with_capacity(6)).unwrap();
        let active: Vec<bool> =
            (0..800).map(|i| i % 7 == 0 || data.points()[i].as_numeric().unwrap()[0] < 0.3).collect();
        let shade = NodeShade::new(&tree, |i| active[i]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = &data.points()[rng.random_range(0..800)];
            let r = rng.random_range(0.0..0.3);
            for mode in [QueryMode::TopDown, QueryMode::BottomUp] {
                let mut full_c = AccessCounter::default();
                let mut pruned_c = AccessCounter::default();
                let full = sorted(tree.range_query(p, r, QueryOptions::mode(mode), &mut full_c).unwrap());
                let pruned =
                    sorted(tree.range_query(p, r, QueryOptions::mode(mode).pruned(&shade), &mut pruned_c).unwrap());
                assert!(pruned_c.node_accesses <= full_c.node_accesses);
                for o in &full {
                    let omitted = pruned.binary_search(o).is_err();
                    let in_grey = shade.is_grey(tree.leaf_of(*o).unwrap());
                    assert_eq!(omitted, in_grey);
                    if omitted {
                        assert!(!active[*o]);
                    }
                }
            }
        }
    }
}
