//! Session store: datasets with their trees, and the solutions computed over them.
//!
//! Datasets and solutions are immutable once stored; a zoom creates a new solution.
//! What needs serializing is the work on a dataset, since each run owns the tree's
//! coloring, so every mutating request holds that dataset's lock for its duration.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use disc_core::disc::{Color, Coloring, DiverseSubset};
use disc_core::mtree::TreeStats;
use disc_core::zoom::{LocalZoomReport, ZoomDiff};
use disc_core::{Dataset, MTree, MTreeConfig, Metric, PointKind};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedMutexGuard};

use crate::error::{ApiError, ApiResult};

pub struct Session {
    pub id: u64,
    pub metric: Metric,
    pub tree_config: MTreeConfig,
    pub tree: Arc<MTree>,
    busy: Arc<Mutex<()>>,
}

impl Session {
    pub fn data(&self) -> &Dataset {
        self.tree.data()
    }

    pub fn summary(&self) -> DatasetSummary {
        let data = self.data();
        DatasetSummary {
            id: self.id,
            n: data.len(),
            d: data.dim(),
            kind: data.kind(),
            metric: self.metric,
            columns: data.columns().to_vec(),
            extent: data.extent(),
            tree: self.tree.stats(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: u64,
    pub n: usize,
    pub d: usize,
    pub kind: PointKind,
    pub metric: Metric,
    pub columns: Vec<String>,
    /// Per-dimension (min, max); absent for categorical data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<Vec<(f64, f64)>>,
    pub tree: TreeStats,
}

pub struct Solution {
    pub id: u64,
    pub dataset: u64,
    pub parent: Option<u64>,
    pub subset: DiverseSubset,
    /// Whether the members are pairwise independent (false for the cover-only algorithms).
    pub independent: bool,
    pub diff: Option<ZoomDiff>,
    /// Present when the solution came from a local zoom, which leaves radii mixed.
    pub local: Option<LocalZoomReport>,
    /// Final coloring of the run, kept so zooming in can resume from it. Not persisted.
    pub coloring: Option<Coloring>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorCounts {
    pub white: usize,
    pub grey: usize,
    pub black: usize,
    pub red: usize,
}

impl ColorCounts {
    pub fn of(state: &Coloring) -> Self {
        let mut c = ColorCounts::default();
        for color in state.colors() {
            match color {
                Color::White => c.white += 1,
                Color::Grey => c.grey += 1,
                Color::Black => c.black += 1,
                Color::Red => c.red += 1,
            }
        }
        c
    }
}

#[derive(Deserialize)]
struct DatasetRecord {
    id: u64,
    metric: Metric,
    tree: MTreeConfig,
    data: Dataset,
}

#[derive(Serialize)]
struct DatasetRecordRef<'a> {
    id: u64,
    metric: Metric,
    tree: &'a MTreeConfig,
    data: &'a Dataset,
}

#[derive(Serialize, Deserialize)]
struct SolutionRecord {
    id: u64,
    dataset: u64,
    parent: Option<u64>,
    subset: DiverseSubset,
    independent: bool,
    diff: Option<ZoomDiff>,
    local: Option<LocalZoomReport>,
}

pub struct Store {
    next_id: AtomicU64,
    datasets: RwLock<HashMap<u64, Arc<Session>>>,
    solutions: RwLock<HashMap<u64, Arc<Solution>>>,
    persist: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store { next_id: AtomicU64::new(1), datasets: RwLock::default(), solutions: RwLock::default(), persist: None }
    }

    /// A store that writes every new dataset and solution under `dir` as JSON, after
    /// loading whatever an earlier run left there.
    pub fn persistent(dir: impl Into<PathBuf>) -> ApiResult<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("datasets"))?;
        std::fs::create_dir_all(dir.join("solutions"))?;
        let store = Store { persist: Some(dir.clone()), ..Store::in_memory() };
        let mut max_id = 0;
        for record in read_records::<DatasetRecord>(&dir.join("datasets"))? {
            max_id = max_id.max(record.id);
            let tree = MTree::build(Arc::new(record.data), record.metric, record.tree.clone())?;
            store.insert_session(record.id, record.metric, record.tree, tree);
        }
        for record in read_records::<SolutionRecord>(&dir.join("solutions"))? {
            max_id = max_id.max(record.id);
            let solution = Solution {
                id: record.id,
                dataset: record.dataset,
                parent: record.parent,
                subset: record.subset,
                independent: record.independent,
                diff: record.diff,
                local: record.local,
                coloring: None,
            };
            store.solutions.write().unwrap().insert(record.id, Arc::new(solution));
        }
        store.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(store)
    }

    fn fresh_id(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::SeqCst)
    }

    fn insert_session(&self, id: u64, metric: Metric, tree_config: MTreeConfig, tree: MTree) -> Arc<Session> {
        let session =
            Arc::new(Session { id, metric, tree_config, tree: Arc::new(tree), busy: Arc::new(Mutex::new(())) });
        self.datasets.write().unwrap().insert(id, session.clone());
        session
    }

    pub fn add_dataset(&self, metric: Metric, tree_config: MTreeConfig, tree: MTree) -> ApiResult<Arc<Session>> {
        let id = self.fresh_id();
        if let Some(dir) = &self.persist {
            let record = DatasetRecordRef { id, metric, tree: &tree_config, data: tree.data() };
            write_record(&dir.join("datasets"), id, &record)?;
        }
        Ok(self.insert_session(id, metric, tree_config, tree))
    }

    /// Stores a solution the caller has already verified.
    pub fn add_solution(&self, mut solution: Solution) -> ApiResult<Arc<Solution>> {
        solution.id = self.fresh_id();
        if let Some(dir) = &self.persist {
            let record = SolutionRecord {
                id: solution.id,
                dataset: solution.dataset,
                parent: solution.parent,
                subset: solution.subset.clone(),
                independent: solution.independent,
                diff: solution.diff.clone(),
                local: solution.local.clone(),
            };
            write_record(&dir.join("solutions"), solution.id, &record)?;
        }
        let solution = Arc::new(solution);
        self.solutions.write().unwrap().insert(solution.id, solution.clone());
        Ok(solution)
    }

    pub fn session(&self, id: u64) -> ApiResult<Arc<Session>> {
        self.datasets.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::not_found("dataset", id))
    }

    pub fn solution(&self, id: u64) -> ApiResult<Arc<Solution>> {
        self.solutions.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::not_found("solution", id))
    }

    /// Claims a dataset for one mutating request; fails with 409 while another holds it.
    pub fn lock_dataset(&self, id: u64) -> ApiResult<OwnedMutexGuard<()>> {
        self.session(id)?.busy.clone().try_lock_owned().map_err(|_| ApiError::busy(id))
    }
}

fn record_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("{id}.json"))
}

fn write_record<T: Serialize>(dir: &Path, id: u64, record: &T) -> ApiResult<()> {
    let path = record_path(dir, id);
    let tmp = path.with_extension("json.tmp");
    let bytes = serde_json::to_vec(record).map_err(|e| ApiError::internal(e.to_string()))?;
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, &path)?;
    Ok(())
}

fn read_records<T: for<'de> Deserialize<'de>>(dir: &Path) -> ApiResult<Vec<T>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let bytes = std::fs::read(&path)?;
            let record =
                serde_json::from_slice(&bytes).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
            out.push(record);
        }
    }
    Ok(out)
}
