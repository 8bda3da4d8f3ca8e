//! M-tree metric index with chained leaves, configurable split policies and
//! node-access accounting.
//!
//! Nodes live in an arena and are addressed by [`NodeId`]. Every object is stored in
//! exactly one leaf; `leaf_of` maps an object to that leaf so range queries can start
//! bottom-up. Leaves are linked left to right; a split splices the new leaf directly
//! after the one it came from.

mod query;
mod split;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};

pub use query::{NodeShade, QueryMode, QueryOptions};
pub use split::{split_entries, Partition, Promote, SplitOutcome, SplitPolicy};

pub type NodeId = usize;

const UNINDEXED: NodeId = usize::MAX;

/// Node visits and distance evaluations performed by queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounter {
    pub node_accesses: u64,
    pub distance_computations: u64,
}

impl AccessCounter {
    pub fn add(&mut self, other: AccessCounter) {
        self.node_accesses += other.node_accesses;
        self.distance_computations += other.distance_computations;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MTreeConfig {
    pub node_capacity: usize,
    pub split_policy: SplitPolicy,
    /// Run a range query per inserted object to initialise neighborhood sizes.
    pub count_neighborhoods_at_build: bool,
    pub build_radius: f64,
    /// Seed for the random promote policy.
    pub seed: u64,
}

impl Default for MTreeConfig {
    fn default() -> Self {
        MTreeConfig {
            node_capacity: 50,
            split_policy: SplitPolicy::MIN_OVERLAP,
            count_neighborhoods_at_build: false,
            build_radius: 0.0,
            seed: 0,
        }
    }
}

impl MTreeConfig {
    pub fn with_capacity(node_capacity: usize) -> Self {
        MTreeConfig { node_capacity, ..Default::default() }
    }

    pub fn counting(mut self, radius: f64) -> Self {
        self.count_neighborhoods_at_build = true;
        self.build_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_capacity < 4 {
            return Err(Error::InvalidConfig(format!("node capacity {} below minimum 4", self.node_capacity)));
        }
        if self.count_neighborhoods_at_build && !(self.build_radius > 0.0) {
            return Err(Error::InvalidRadius(self.build_radius));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RoutingEntry {
    pub(crate) pivot: usize,
    pub(crate) radius: f64,
    pub(crate) dist_to_parent: f64,
    pub(crate) child: NodeId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafEntry {
    pub object: usize,
    pub dist_to_parent: f64,
}

#[derive(Clone, Debug)]
pub(crate) enum Body {
    Internal(Vec<RoutingEntry>),
    Leaf(Vec<LeafEntry>),
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) parent: Option<NodeId>,
    /// Routing object of the entry pointing at this node; `None` for the root.
    pub(crate) pivot: Option<usize>,
    pub(crate) body: Body,
    pub(crate) next_leaf: Option<NodeId>,
}

impl Node {
    fn len(&self) -> usize {
        match &self.body {
            Body::Internal(e) => e.len(),
            Body::Leaf(e) => e.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MTree {
    data: Arc<Dataset>,
    metric: Metric,
    config: MTreeConfig,
    nodes: Vec<Node>,
    root: NodeId,
    first_leaf: NodeId,
    leaf_of: Vec<NodeId>,
    len: usize,
    height: usize,
    build_counts: Option<Vec<u32>>,
    build_counter: AccessCounter,
    rng: ChaCha8Rng,
}

impl MTree {
    /// Indexes every object of `data` in id order.
    pub fn build(data: Arc<Dataset>, metric: Metric, config: MTreeConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut tree = Self::empty(data, metric, config)?;
        for id in 0..tree.data.len() {
            tree.insert(id)?;
        }
        Ok(tree)
    }

    /// A tree over `data` with nothing indexed yet.
    pub fn empty(data: Arc<Dataset>, metric: Metric, config: MTreeConfig) -> Result<Self> {
        config.validate()?;
        metric.check(data.kind())?;
        let n = data.len();
        let build_counts = config.count_neighborhoods_at_build.then(|| vec![0; n]);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(MTree {
            data,
            metric,
            config,
            nodes: vec![Node { parent: None, pivot: None, body: Body::Leaf(Vec::new()), next_leaf: None }],
            root: 0,
            first_leaf: 0,
            leaf_of: vec![UNINDEXED; n],
            len: 0,
            height: 1,
            build_counts,
            build_counter: AccessCounter::default(),
            rng,
        })
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn config(&self) -> &MTreeConfig {
        &self.config
    }

    /// Number of indexed objects.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.data.dist(self.metric, a, b)
    }

    /// Neighborhood sizes gathered during construction, with the radius used.
    pub fn build_counts(&self) -> Option<(f64, &[u32])> {
        self.build_counts.as_deref().map(|c| (self.config.build_radius, c))
    }

    /// Cost of the neighborhood-counting queries issued while building.
    pub fn build_counter(&self) -> AccessCounter {
        self.build_counter
    }

    pub fn is_indexed(&self, id: usize) -> bool {
        self.leaf_of.get(id).is_some_and(|&l| l != UNINDEXED)
    }

    /// The leaf currently holding `id`.
    pub fn leaf_of(&self, id: usize) -> Option<NodeId> {
        self.leaf_of.get(id).copied().filter(|&l| l != UNINDEXED)
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node].parent
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        matches!(self.nodes[node].body, Body::Leaf(_))
    }

    pub fn children(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let entries: &[RoutingEntry] = match &self.nodes[node].body {
            Body::Internal(e) => e,
            Body::Leaf(_) => &[],
        };
        entries.iter().map(|e| e.child)
    }

    pub fn leaf_entries(&self, node: NodeId) -> &[LeafEntry] {
        match &self.nodes[node].body {
            Body::Leaf(e) => e,
            Body::Internal(_) => &[],
        }
    }

    /// Leaf nodes in chain order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        let start = (self.len > 0).then_some(self.first_leaf);
        std::iter::successors(start, move |&l| self.nodes[l].next_leaf)
    }

    /// Every indexed object, in left-to-right leaf-chain order.
    pub fn leaf_iter(&self) -> impl Iterator<Item = &LeafEntry> + '_ {
        self.leaves().flat_map(move |l| self.leaf_entries(l).iter())
    }

    /// Adds object `id` of the dataset to the index.
    pub fn insert(&mut self, id: usize) -> Result<()> {
        if id >= self.data.len() {
            return Err(Error::UnknownId(id));
        }
        if self.is_indexed(id) {
            return Err(Error::Malformed(format!("object {id} already indexed")));
        }
        if self.build_counts.is_some() {
            // Query before borrowing the counts mutably; the query needs `&self`.
            let mut counter = AccessCounter::default();
            let mut hits = Vec::new();
            self.query_into(
                &self.data.points()[id].coords,
                None,
                self.config.build_radius,
                QueryOptions::default(),
                &mut counter,
                &mut hits,
            );
            self.build_counter.add(counter);
            if let Some(counts) = self.build_counts.as_mut() {
                counts[id] = hits.len() as u32;
                for (h, _) in hits {
                    counts[h] += 1;
                }
            }
        }

        let mut node = self.root;
        let mut pivot_dist = 0.0;
        loop {
            match &mut self.nodes[node].body {
                Body::Internal(entries) => {
                    let data = &self.data;
                    let metric = self.metric;
                    let mut best: Option<(usize, f64, f64)> = None; // (index, enlargement, distance)
                    for (i, e) in entries.iter().enumerate() {
                        let d = data.dist(metric, id, e.pivot);
                        let grow = (d - e.radius).max(0.0);
                        let better = match best {
                            None => true,
                            Some((_, bg, bd)) => grow < bg || (grow == bg && d < bd),
                        };
                        if better {
                            best = Some((i, grow, d));
                        }
                    }
                    let (i, _, d) = best.expect("internal nodes are never empty");
                    let e = &mut entries[i];
                    if d > e.radius {
                        e.radius = d;
                    }
                    pivot_dist = d;
                    node = e.child;
                }
                Body::Leaf(entries) => {
                    entries.push(LeafEntry { object: id, dist_to_parent: pivot_dist });
                    break;
                }
            }
        }
        self.leaf_of[id] = node;
        self.len += 1;
        if self.nodes[node].len() > self.config.node_capacity {
            self.split(node);
        }
        Ok(())
    }

    fn split(&mut self, node: NodeId) {
        let items: Vec<usize> = match &self.nodes[node].body {
            Body::Leaf(e) => e.iter().map(|e| e.object).collect(),
            Body::Internal(e) => e.iter().map(|e| e.pivot).collect(),
        };
        let outcome = split_entries(
            &self.data,
            self.metric,
            self.nodes[node].pivot,
            &items,
            self.config.split_policy,
            &mut self.rng,
        );
        let [p0, p1] = outcome.pivots;
        let sibling = self.nodes.len();
        let mut side = vec![0u8; items.len()];
        for &i in &outcome.groups[1] {
            side[i] = 1;
        }

        let old_body = std::mem::replace(&mut self.nodes[node].body, Body::Leaf(Vec::new()));
        let (keep_body, move_body) = match old_body {
            Body::Leaf(entries) => {
                let (mut keep, mut moved) = (Vec::new(), Vec::new());
                for (i, mut e) in entries.into_iter().enumerate() {
                    if side[i] == 0 {
                        e.dist_to_parent = self.data.dist(self.metric, e.object, p0);
                        keep.push(e);
                    } else {
                        e.dist_to_parent = self.data.dist(self.metric, e.object, p1);
                        self.leaf_of[e.object] = sibling;
                        moved.push(e);
                    }
                }
                (Body::Leaf(keep), Body::Leaf(moved))
            }
            Body::Internal(entries) => {
                let (mut keep, mut moved) = (Vec::new(), Vec::new());
                for (i, mut e) in entries.into_iter().enumerate() {
                    if side[i] == 0 {
                        e.dist_to_parent = self.data.dist(self.metric, e.pivot, p0);
                        keep.push(e);
                    } else {
                        e.dist_to_parent = self.data.dist(self.metric, e.pivot, p1);
                        self.nodes[e.child].parent = Some(sibling);
                        moved.push(e);
                    }
                }
                (Body::Internal(keep), Body::Internal(moved))
            }
        };
        let is_leaf = matches!(keep_body, Body::Leaf(_));
        let parent = self.nodes[node].parent;
        self.nodes[node].body = keep_body;
        self.nodes[node].pivot = Some(p0);
        let next = self.nodes[node].next_leaf;
        self.nodes.push(Node {
            parent,
            pivot: Some(p1),
            body: move_body,
            next_leaf: if is_leaf { next } else { None },
        });
        if is_leaf {
            self.nodes[node].next_leaf = Some(sibling);
        }

        let r0 = self.covering_radius(node, p0);
        let r1 = self.covering_radius(sibling, p1);

        match parent {
            None => {
                let root = self.nodes.len();
                self.nodes.push(Node {
                    parent: None,
                    pivot: None,
                    body: Body::Internal(vec![
                        RoutingEntry { pivot: p0, radius: r0, dist_to_parent: 0.0, child: node },
                        RoutingEntry { pivot: p1, radius: r1, dist_to_parent: 0.0, child: sibling },
                    ]),
                    next_leaf: None,
                });
                self.nodes[node].parent = Some(root);
                self.nodes[sibling].parent = Some(root);
                self.root = root;
                self.height += 1;
            }
            Some(parent) => {
                let parent_pivot = self.nodes[parent].pivot;
                let to_parent = |o: usize| parent_pivot.map_or(0.0, |pp| self.data.dist(self.metric, o, pp));
                let (d0, d1) = (to_parent(p0), to_parent(p1));
                let Body::Internal(entries) = &mut self.nodes[parent].body else {
                    unreachable!("parent of a node is internal")
                };
                let at = entries.iter().position(|e| e.child == node).expect("child registered in parent");
                entries[at] = RoutingEntry { pivot: p0, radius: r0, dist_to_parent: d0, child: node };
                entries.insert(at + 1, RoutingEntry { pivot: p1, radius: r1, dist_to_parent: d1, child: sibling });
                if entries.len() > self.config.node_capacity {
                    self.split(parent);
                }
            }
        }
    }

    /// Exact covering radius of `node`'s subtree around `pivot`.
    fn covering_radius(&self, node: NodeId, pivot: usize) -> f64 {
        let mut radius = 0.0f64;
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].body {
                Body::Leaf(entries) => {
                    for e in entries {
                        radius = radius.max(self.dist(pivot, e.object));
                    }
                }
                Body::Internal(entries) => stack.extend(entries.iter().map(|e| e.child)),
            }
        }
        radius
    }

    fn subtree_objects(&self, node: NodeId, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].body {
                Body::Leaf(entries) => out.extend(entries.iter().map(|e| e.object)),
                Body::Internal(entries) => stack.extend(entries.iter().map(|e| e.child)),
            }
        }
    }

    /// Checks every structural invariant; returns a description of the first violation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        const SLACK: f64 = 1e-9;
        let mut seen = vec![false; self.data.len()];
        let mut leaf_depths = Vec::new();
        let mut stack = vec![(self.root, 1usize)];
        while let Some((n, depth)) = stack.pop() {
            let node = &self.nodes[n];
            if n != self.root && node.len() == 0 {
                return Err(format!("node {n} is empty"));
            }
            if node.len() > self.config.node_capacity {
                return Err(format!("node {n} over capacity"));
            }
            match &node.body {
                Body::Leaf(entries) => {
                    leaf_depths.push(depth);
                    for e in entries {
                        if std::mem::replace(&mut seen[e.object], true) {
                            return Err(format!("object {} stored twice", e.object));
                        }
                        if self.leaf_of[e.object] != n {
                            return Err(format!("back-reference of {} is stale", e.object));
                        }
                        let expect = node.pivot.map_or(0.0, |p| self.dist(p, e.object));
                        if (expect - e.dist_to_parent).abs() > SLACK {
                            return Err(format!("parent distance of object {} is wrong", e.object));
                        }
                    }
                }
                Body::Internal(entries) => {
                    for e in entries {
                        let child = &self.nodes[e.child];
                        if child.parent != Some(n) || child.pivot != Some(e.pivot) {
                            return Err(format!("child link {n} -> {} inconsistent", e.child));
                        }
                        let expect = node.pivot.map_or(0.0, |p| self.dist(p, e.pivot));
                        if (expect - e.dist_to_parent).abs() > SLACK {
                            return Err(format!("parent distance of pivot {} is wrong", e.pivot));
                        }
                        let mut objs = Vec::new();
                        self.subtree_objects(e.child, &mut objs);
                        if let Some(o) = objs.iter().find(|&&o| self.dist(e.pivot, o) > e.radius + SLACK) {
                            return Err(format!("object {o} outside covering radius of node {}", e.child));
                        }
                        stack.push((e.child, depth + 1));
                    }
                }
            }
        }
        if leaf_depths.iter().any(|&d| d != self.height) {
            return Err("tree is not balanced".into());
        }
        let indexed = seen.iter().filter(|&&s| s).count();
        if indexed != self.len {
            return Err(format!("{indexed} objects stored, {} expected", self.len));
        }
        let mut chain_seen = vec![false; self.data.len()];
        let mut chain_len = 0;
        for e in self.leaf_iter() {
            if std::mem::replace(&mut chain_seen[e.object], true) {
                return Err(format!("leaf chain visits {} twice", e.object));
            }
            chain_len += 1;
        }
        if chain_len != self.len {
            return Err(format!("leaf chain has {chain_len} objects, {} expected", self.len));
        }
        Ok(())
    }

    /// Structural summary for reporting.
    pub fn stats(&self) -> TreeStats {
        let mut levels: Vec<LevelStats> = Vec::new();
        let mut frontier = vec![self.root];
        let mut level = 0;
        while !frontier.is_empty() {
            let entries: usize = frontier.iter().map(|&n| self.nodes[n].len()).sum();
            levels.push(LevelStats {
                level,
                nodes: frontier.len(),
                entries,
                mean_occupancy: entries as f64 / frontier.len() as f64 / self.config.node_capacity as f64,
            });
            frontier = frontier.iter().flat_map(|&n| self.children(n)).collect();
            level += 1;
        }
        TreeStats {
            objects: self.len,
            height: self.height,
            node_count: self.nodes.len(),
            leaf_count: self.leaves().count(),
            node_capacity: self.config.node_capacity,
            split_policy: self.config.split_policy.to_string(),
            fat_factor: self.fat_factor(),
            build_node_accesses: self.build_counter.node_accesses,
            levels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub nodes: usize,
    pub entries: usize,
    /// Mean entries per node as a fraction of node capacity.
    pub mean_occupancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub objects: usize,
    pub height: usize,
    pub node_count: usize,
    pub leaf_count: usize,
    pub node_capacity: usize,
    pub split_policy: String,
    pub fat_factor: f64,
    pub build_node_accesses: u64,
    pub levels: Vec<LevelStats>,
}

/// Fat-factor from its ingredients: `Z` total point-query node accesses over `n`
/// objects in a tree of height `h` with `m` nodes. A single-path tree scores 0.
pub fn fat_factor_from(z: u64, n: usize, h: usize, m: usize) -> f64 {
    if m <= h || n == 0 {
        return 0.0;
    }
    let nh = (n * h) as f64;
    (z as f64 - nh) / n as f64 / (m - h) as f64
}
