use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtree::{AccessCounter, MTree, NodeShade, QueryMode, QueryOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Grey,
    Black,
    /// A former member awaiting a decision while zooming out.
    Red,
}

impl Color {
    /// White and red objects still need a decision, so they keep their leaf white.
    pub fn is_active(self) -> bool {
        matches!(self, Color::White | Color::Red)
    }
}

/// Per-object colors, neighborhood counters and closest-black distances for one run
/// over a shared tree.
#[derive(Clone, Debug)]
pub struct Coloring {
    radius: f64,
    colors: Vec<Color>,
    counts: Vec<u32>,
    closest_black: Vec<f64>,
    closest_black_exact: bool,
    whites: usize,
    reds: usize,
    shade: NodeShade,
}

impl Coloring {
    /// Every object white.
    pub fn new(tree: &MTree, radius: f64) -> Self {
        let n = tree.data().len();
        Coloring {
            radius,
            colors: vec![Color::White; n],
            counts: vec![0; n],
            closest_black: vec![f64::INFINITY; n],
            closest_black_exact: true,
            whites: n,
            reds: 0,
            shade: NodeShade::all_white(tree),
        }
    }

    /// `ids` black, everything else grey, closest-black distances recomputed.
    pub fn from_subset(tree: &MTree, ids: &[usize], radius: f64, counter: &mut AccessCounter) -> Result<Self> {
        let n = tree.data().len();
        let mut colors = vec![Color::Grey; n];
        for &id in ids {
            *colors.get_mut(id).ok_or(Error::UnknownId(id))? = Color::Black;
        }
        let mut state = Coloring {
            radius,
            colors,
            counts: vec![0; n],
            closest_black: vec![f64::INFINITY; n],
            closest_black_exact: false,
            whites: 0,
            reds: 0,
            shade: NodeShade::new(tree, |_| false),
        };
        state.refresh_closest_black(tree, counter);
        Ok(state)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub(crate) fn set_radius(&mut self, radius: f64) {
        self.radius = radius;
    }

    pub fn color(&self, id: usize) -> Color {
        self.colors[id]
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    /// The neighborhood counter the current pass maintains (white neighbors, or red
    /// neighbors during the first zoom-out pass).
    pub fn count(&self, id: usize) -> u32 {
        self.counts[id]
    }

    pub fn closest_black(&self, id: usize) -> f64 {
        self.closest_black[id]
    }

    /// Whether every closest-black distance at or below the radius is exact. Pruned
    /// construction leaves grey objects it skipped with stale values.
    pub fn is_closest_black_exact(&self) -> bool {
        self.closest_black_exact
    }

    pub fn whites(&self) -> usize {
        self.whites
    }

    pub fn reds(&self) -> usize {
        self.reds
    }

    pub fn shade(&self) -> &NodeShade {
        &self.shade
    }

    pub fn ids_with(&self, color: Color) -> Vec<usize> {
        (0..self.colors.len()).filter(|&i| self.colors[i] == color).collect()
    }

    pub(crate) fn paint(&mut self, tree: &MTree, id: usize, color: Color) {
        let old = self.colors[id];
        if old == color {
            return;
        }
        self.colors[id] = color;
        match old {
            Color::White => self.whites -= 1,
            Color::Red => self.reds -= 1,
            _ => {}
        }
        match color {
            Color::White => self.whites += 1,
            Color::Red => self.reds += 1,
            _ => {}
        }
        match (old.is_active(), color.is_active()) {
            (true, false) => self.shade.deactivate(tree, id),
            (false, true) => self.shade.activate(tree, id),
            _ => {}
        }
    }

    /// Recomputes closest-black distances: one unpruned query of the current radius
    /// around every black object, then a direct scan for anything left uncovered.
    pub fn refresh_closest_black(&mut self, tree: &MTree, counter: &mut AccessCounter) {
        self.closest_black.iter_mut().for_each(|d| *d = f64::INFINITY);
        let blacks = self.ids_with(Color::Black);
        let mut hits = Vec::new();
        for &b in &blacks {
            self.closest_black[b] = 0.0;
            tree.query_object(b, self.radius, QueryOptions::default(), counter, &mut hits);
            for &(q, d) in &hits {
                if d < self.closest_black[q] {
                    self.closest_black[q] = d;
                }
            }
        }
        if !blacks.is_empty() {
            for q in 0..self.colors.len() {
                if self.closest_black[q].is_infinite() {
                    counter.distance_computations += blacks.len() as u64;
                    self.closest_black[q] = blacks.iter().map(|&b| tree.dist(q, b)).fold(f64::INFINITY, f64::min);
                }
            }
        }
        self.closest_black_exact = true;
    }
}

/// Candidates ordered by neighborhood count (descending unless built ascending), then
/// by a tier (lower first), then by id.
#[derive(Clone, Debug)]
pub struct CandidateQueue {
    set: BTreeSet<(u32, u8, usize)>,
    key: Vec<Option<(u32, u8)>>,
    ascending: bool,
}

impl CandidateQueue {
    pub fn new(n: usize) -> Self {
        CandidateQueue { set: BTreeSet::new(), key: vec![None; n], ascending: false }
    }

    pub fn ascending(n: usize) -> Self {
        CandidateQueue { ascending: true, ..Self::new(n) }
    }

    fn rank(&self, count: u32) -> u32 {
        if self.ascending {
            count
        } else {
            u32::MAX - count
        }
    }

    /// Inserts `id`, or moves it if already present.
    pub fn upsert(&mut self, id: usize, count: u32, tier: u8) {
        let rank = self.rank(count);
        if let Some((old_rank, old_tier)) = self.key[id] {
            if (old_rank, old_tier) == (rank, tier) {
                return;
            }
            self.set.remove(&(old_rank, old_tier, id));
        }
        self.set.insert((rank, tier, id));
        self.key[id] = Some((rank, tier));
    }

    /// Re-keys `id` only if it is a member.
    pub fn update(&mut self, id: usize, count: u32, tier: u8) {
        if self.key[id].is_some() {
            self.upsert(id, count, tier);
        }
    }

    pub fn remove(&mut self, id: usize) {
        if let Some((rank, tier)) = self.key[id].take() {
            self.set.remove(&(rank, tier, id));
        }
    }

    pub fn contains(&self, id: usize) -> bool {
        self.key[id].is_some()
    }

    pub fn peek(&self) -> Option<usize> {
        self.set.first().map(|&(_, _, id)| id)
    }

    pub fn pop(&mut self) -> Option<usize> {
        let (_, _, id) = self.set.pop_first()?;
        self.key[id] = None;
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// How a run issues its range queries.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Probe {
    pub mode: QueryMode,
    pub prune: bool,
    pub stop_at_grey: bool,
}

impl Probe {
    pub fn new(mode: QueryMode, prune: bool) -> Self {
        Probe { mode, prune, stop_at_grey: false }
    }
}

/// Shared machinery of one solver or zoom run.
pub(crate) struct Run<'t> {
    pub tree: &'t MTree,
    pub r: f64,
    pub state: Coloring,
    pub counter: AccessCounter,
    pub selected: Vec<usize>,
    /// Active objects turned grey by the last `cover`, within `r`.
    pub fresh: Vec<usize>,
    /// Active objects found by the last `cover` beyond `r` but within its query radius.
    pub ring: Vec<usize>,
    buf: Vec<(usize, f64)>,
}

impl<'t> Run<'t> {
    pub fn new(tree: &'t MTree, r: f64, state: Coloring) -> Self {
        Run {
            tree,
            r,
            state,
            counter: AccessCounter::default(),
            selected: Vec::new(),
            fresh: Vec::new(),
            ring: Vec::new(),
            buf: Vec::new(),
        }
    }

    /// Range query around object `id`; hand the buffer back with `recycle`.
    pub fn probe(&mut self, id: usize, radius: f64, probe: Probe) -> Vec<(usize, f64)> {
        let mut out = std::mem::take(&mut self.buf);
        let opts = QueryOptions {
            mode: probe.mode,
            prune: probe.prune.then_some(&self.state.shade),
            stop_at_grey: probe.stop_at_grey,
        };
        self.tree.query_object(id, radius, opts, &mut self.counter, &mut out);
        out
    }

    pub fn recycle(&mut self, buf: Vec<(usize, f64)>) {
        self.buf = buf;
    }

    /// Makes `p` black and its active neighbors within `r` grey.
    ///
    /// The query runs with `query_radius >= r`; active objects beyond `r` land in
    /// `ring`. With `require_progress`, a grey `p` that would cover nothing new stays
    /// grey and `false` is returned.
    pub fn cover(&mut self, p: usize, query_radius: f64, probe: Probe, require_progress: bool) -> bool {
        let was = self.state.colors[p];
        if was.is_active() {
            self.state.paint(self.tree, p, Color::Black);
        }
        let hits = self.probe(p, query_radius, probe);
        self.fresh.clear();
        self.ring.clear();
        for &(q, d) in &hits {
            if q != p && self.state.colors[q].is_active() {
                if d <= self.r {
                    self.fresh.push(q);
                } else {
                    self.ring.push(q);
                }
            }
        }
        if was == Color::Grey && require_progress && self.fresh.is_empty() {
            self.recycle(hits);
            return false;
        }
        self.state.paint(self.tree, p, Color::Black);
        self.state.closest_black[p] = 0.0;
        for &(q, d) in &hits {
            if d < self.state.closest_black[q] {
                self.state.closest_black[q] = d;
            }
        }
        for i in 0..self.fresh.len() {
            let q = self.fresh[i];
            self.state.paint(self.tree, q, Color::Grey);
        }
        if probe.prune || probe.stop_at_grey {
            self.state.closest_black_exact = false;
        }
        self.recycle(hits);
        self.selected.push(p);
        true
    }

    /// Sets each object's counter to the number of neighbors within `radius` whose
    /// color satisfies `counted`, for every object satisfying `wanted`.
    pub fn count_neighbors(
        &mut self,
        radius: f64,
        probe: Probe,
        wanted: impl Fn(Color) -> bool,
        counted: impl Fn(Color) -> bool,
    ) {
        let all_white = self.state.whites == self.state.colors.len();
        if all_white && counted(Color::White) {
            if let Some((build_r, counts)) = self.tree.build_counts() {
                if build_r == radius {
                    self.state.counts.copy_from_slice(counts);
                    return;
                }
            }
        }
        for id in 0..self.state.colors.len() {
            if !wanted(self.state.colors[id]) {
                continue;
            }
            let hits = self.probe(id, radius, probe);
            self.state.counts[id] =
                hits.iter().filter(|&&(q, _)| q != id && counted(self.state.colors[q])).count() as u32;
            self.recycle(hits);
        }
    }

    pub fn count(&self, id: usize) -> u32 {
        self.state.counts[id]
    }

    pub fn decrement(&mut self, id: usize, by: u32) {
        debug_assert!(self.state.counts[id] >= by, "counter underflow at {id}");
        self.state.counts[id] = self.state.counts[id].saturating_sub(by);
    }

    pub fn color(&self, id: usize) -> Color {
        self.state.colors[id]
    }

    /// Decrements the counters of objects satisfying `affected` within `radius` of
    /// each object in `lost`, re-keying queue members.
    pub fn subtract_around(
        &mut self,
        lost: &[usize],
        radius: f64,
        probe: Probe,
        queue: &mut CandidateQueue,
        affected: impl Fn(Color) -> bool,
        tier: impl Fn(Color) -> u8,
    ) {
        for &g in lost {
            let hits = self.probe(g, radius, probe);
            for &(u, _) in &hits {
                if u != g && affected(self.state.colors[u]) {
                    self.decrement(u, 1);
                    queue.update(u, self.state.counts[u], tier(self.state.colors[u]));
                }
            }
            self.recycle(hits);
        }
    }

    /// Leaf-chain scan making every object that satisfies `pick` black in turn.
    pub fn chain_pass(
        &mut self,
        probe: Probe,
        pick: impl Fn(Color) -> bool,
        observer: &mut dyn FnMut(&Coloring, usize),
    ) {
        let tree = self.tree;
        for leaf in tree.leaves() {
            if probe.prune && self.state.shade.is_grey(leaf) {
                continue;
            }
            self.counter.node_accesses += 1;
            for e in tree.leaf_entries(leaf) {
                if pick(self.state.colors[e.object]) {
                    self.cover(e.object, self.r, probe, false);
                    observer(&self.state, e.object);
                }
            }
        }
    }

    pub fn into_parts(self) -> (Vec<usize>, Coloring, AccessCounter) {
        (self.selected, self.state, self.counter)
    }
}
