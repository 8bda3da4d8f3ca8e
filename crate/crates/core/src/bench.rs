//! Experiment harness: solution sizes and node accesses across algorithms, radii,
//! zoom steps and tree layouts, written as CSV.
//!
//! Every row is re-verified before it is emitted. Wall-clock time is only recorded
//! when a config asks for it, so identical configs produce identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::jaccard_distance;
use crate::data::{DataDistribution, GeneratorSpec};
use crate::disc::{solve_with_state, verify, Algorithm, GreedyVariant, SolveOptions, Verification};
use crate::error::{Error, Result};
use crate::metrics::{Dataset, Metric};
use crate::mtree::{MTree, MTreeConfig, QueryMode, SplitPolicy};
use crate::zoom::{zoom_in_from, zoom_out, ZoomVariant};

pub const DEFAULT_RADII: [f64; 7] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07];

fn default_dataset() -> GeneratorSpec {
    GeneratorSpec::clustered(10_000, 2, crate::data::DEFAULT_CLUSTERS, 0)
}

fn label(spec: &GeneratorSpec) -> String {
    let dist = match spec.distribution {
        DataDistribution::Uniform => "uniform",
        DataDistribution::Clustered => "clustered",
    };
    format!("{dist}-{}x{}", spec.n, spec.d)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidConfig("no radii given".into()));
    }
    match radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        Some(&r) => Err(Error::InvalidRadius(r)),
        None => Ok(()),
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        Err(Error::InvalidConfig("no seeds given".into()))
    } else {
        Ok(())
    }
}

fn checked(
    data: &Dataset,
    metric: Metric,
    ids: &[usize],
    r: f64,
    independent: bool,
    what: &str,
) -> Result<Verification> {
    let v = verify(data, metric, ids, r)?;
    if !v.coverage || (independent && !v.independence) {
        return Err(Error::VerificationFailed(format!("{what} at r = {r}: {v:?}")));
    }
    Ok(v)
}

fn millis(start: Option<Instant>) -> Option<f64> {
    start.map(|t| t.elapsed().as_secs_f64() * 1e3)
}

/// Algorithms per radius, one row per (seed, algorithm, radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub dataset: GeneratorSpec,
    pub metric: Metric,
    pub radii: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// Each seed generates its own dataset and seeds its own tree.
    pub seeds: Vec<u64>,
    pub tree: MTreeConfig,
    pub query_mode: QueryMode,
    /// Record wall-clock milliseconds per row.
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            dataset: default_dataset(),
            metric: Metric::Euclidean,
            radii: DEFAULT_RADII.to_vec(),
            algorithms: vec![
                Algorithm::Basic { pruned: false },
                Algorithm::GREEDY,
                Algorithm::Greedy { variant: GreedyVariant::LazyGrey, pruned: false },
                Algorithm::Greedy { variant: GreedyVariant::LazyWhite, pruned: false },
                Algorithm::GreedyC,
            ],
            seeds: vec![0],
            tree: MTreeConfig::default(),
            query_mode: QueryMode::TopDown,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub seed: u64,
    pub dataset: String,
    pub n: usize,
    pub metric: Metric,
    pub algorithm: Algorithm,
    pub radius: f64,
    pub size: usize,
    pub node_accesses: u64,
    pub distance_computations: u64,
    pub coverage: bool,
    pub independence: bool,
    pub wall_ms: Option<f64>,
}

pub fn run_suite(config: &SuiteConfig) -> Result<Vec<SuiteRow>> {
    check_seeds(&config.seeds)?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let data = Arc::new(config.dataset.with_seed(seed).generate()?);
        rows.extend(suite_rows(&data, &label(&config.dataset), seed, config)?);
    }
    Ok(rows)
}

/// Same as [`run_suite`] over a fixed dataset; seeds then only vary the tree.
pub fn run_suite_on(data: &Arc<Dataset>, dataset: &str, config: &SuiteConfig) -> Result<Vec<SuiteRow>> {
    check_seeds(&config.seeds)?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        rows.extend(suite_rows(data, dataset, seed, config)?);
    }
    Ok(rows)
}

fn suite_rows(data: &Arc<Dataset>, dataset: &str, seed: u64, config: &SuiteConfig) -> Result<Vec<SuiteRow>> {
    check_radii(&config.radii)?;
    if config.algorithms.is_empty() {
        return Err(Error::InvalidConfig("no algorithms given".into()));
    }
    let tree_config = MTreeConfig { seed, ..config.tree.clone() };
    let tree = MTree::build(data.clone(), config.metric, tree_config)?;
    let opts = SolveOptions { query_mode: config.query_mode };
    let mut rows = Vec::new();
    for &r in &config.radii {
        for &alg in &config.algorithms {
            let start = config.timing.then(Instant::now);
            let (s, _) = solve_with_state(&tree, r, alg, opts)?;
            let wall_ms = millis(start);
            let v = checked(data, config.metric, &s.ids, r, alg.is_disc(), &alg.to_string())?;
            rows.push(SuiteRow {
                seed,
                dataset: dataset.to_string(),
                n: data.len(),
                metric: config.metric,
                algorithm: alg,
                radius: r,
                size: s.len(),
                node_accesses: s.access_cost,
                distance_computations: s.distance_computations,
                coverage: v.coverage,
                independence: v.independence,
                wall_ms,
            });
        }
    }
    Ok(rows)
}

/// Adapts the Greedy-DisC solution at each rung of a radius ladder to the next rung
/// and compares it with solving the next rung from scratch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoomSuiteConfig {
    pub dataset: GeneratorSpec,
    pub metric: Metric,
    /// Strictly decreasing (zooming in) or strictly increasing (zooming out).
    pub radii: Vec<f64>,
    /// Empty means every variant that applies to the ladder's direction.
    pub variants: Vec<ZoomVariant>,
    pub seeds: Vec<u64>,
    pub tree: MTreeConfig,
    pub timing: bool,
}

impl Default for ZoomSuiteConfig {
    fn default() -> Self {
        let mut radii = DEFAULT_RADII.to_vec();
        radii.reverse();
        ZoomSuiteConfig {
            dataset: default_dataset(),
            metric: Metric::Euclidean,
            radii,
            variants: Vec::new(),
            seeds: vec![0],
            tree: MTreeConfig::default(),
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomRow {
    pub seed: u64,
    pub dataset: String,
    pub variant: ZoomVariant,
    pub from_radius: f64,
    pub to_radius: f64,
    pub base_size: usize,
    pub adapted_size: usize,
    pub adapted_accesses: u64,
    pub scratch_size: usize,
    pub scratch_accesses: u64,
    /// Jaccard distance of the adapted subset to the base.
    pub jaccard_adapted: f64,
    /// Jaccard distance of the from-scratch subset to the base.
    pub jaccard_scratch: f64,
    pub kept: usize,
    pub added: usize,
    pub removed: usize,
    pub wall_ms: Option<f64>,
}

/// True when the ladder zooms in.
fn ladder_direction(radii: &[f64]) -> Result<bool> {
    if radii.len() < 2 {
        return Err(Error::InvalidConfig("a zoom ladder needs at least two radii".into()));
    }
    check_radii(radii)?;
    let zoom_in = radii[1] < radii[0];
    for w in radii.windows(2) {
        if w[0] == w[1] {
            return Err(Error::InvalidConfig(format!("radius {} repeated in the zoom ladder", w[0])));
        }
        if (w[1] < w[0]) != zoom_in {
            return Err(Error::InvalidConfig("zoom ladder must be monotone".into()));
        }
    }
    Ok(zoom_in)
}

pub fn run_zoom_suite(config: &ZoomSuiteConfig) -> Result<Vec<ZoomRow>> {
    check_seeds(&config.seeds)?;
    let zoom_in = ladder_direction(&config.radii)?;
    let allowed: &[ZoomVariant] = if zoom_in { &ZoomVariant::IN } else { &ZoomVariant::OUT };
    let variants = if config.variants.is_empty() { allowed.to_vec() } else { config.variants.clone() };
    if let Some(v) = variants.iter().find(|v| !allowed.contains(v) && !(!zoom_in && **v == ZoomVariant::Greedy)) {
        let dir = if zoom_in { "in" } else { "out" };
        return Err(Error::InvalidConfig(format!("variant {v} does not zoom {dir}")));
    }
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let data = Arc::new(config.dataset.with_seed(seed).generate()?);
        let tree = MTree::build(data.clone(), config.metric, MTreeConfig { seed, ..config.tree.clone() })?;
        let solved: Vec<_> = config
            .radii
            .iter()
            .map(|&r| solve_with_state(&tree, r, Algorithm::GREEDY, SolveOptions::default()))
            .collect::<Result<_>>()?;
        for step in 0..config.radii.len() - 1 {
            let (base, state) = &solved[step];
            let (scratch, _) = &solved[step + 1];
            let r_new = config.radii[step + 1];
            for &variant in &variants {
                let start = config.timing.then(Instant::now);
                let out = if zoom_in {
                    zoom_in_from(&tree, state.clone(), base, r_new, variant)?
                } else {
                    zoom_out(&tree, base, r_new, variant)?
                };
                let wall_ms = millis(start);
                checked(&data, config.metric, &out.subset.ids, r_new, true, &out.subset.algorithm)?;
                rows.push(ZoomRow {
                    seed,
                    dataset: label(&config.dataset),
                    variant,
                    from_radius: base.radius,
                    to_radius: r_new,
                    base_size: base.len(),
                    adapted_size: out.subset.len(),
                    adapted_accesses: out.subset.access_cost,
                    scratch_size: scratch.len(),
                    scratch_accesses: scratch.access_cost,
                    jaccard_adapted: jaccard_distance(&out.subset.ids, &base.ids),
                    jaccard_scratch: jaccard_distance(&scratch.ids, &base.ids),
                    kept: out.diff.kept.len(),
                    added: out.diff.added.len(),
                    removed: out.diff.removed.len(),
                    wall_ms,
                });
            }
        }
    }
    Ok(rows)
}

/// One fixed workload per (split policy, node capacity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSuiteConfig {
    pub dataset: GeneratorSpec,
    pub metric: Metric,
    pub policies: Vec<SplitPolicy>,
    pub capacities: Vec<usize>,
    pub radius: f64,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub timing: bool,
}

impl Default for TreeSuiteConfig {
    fn default() -> Self {
        TreeSuiteConfig {
            dataset: GeneratorSpec::uniform(10_000, 2, 0),
            metric: Metric::Euclidean,
            policies: vec![SplitPolicy::MIN_OVERLAP, SplitPolicy::MAX_DISTANCE, SplitPolicy::RANDOM],
            capacities: vec![25, 50, 100],
            radius: 0.02,
            algorithm: Algorithm::GREEDY,
            seeds: vec![0],
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub seed: u64,
    pub dataset: String,
    pub policy: SplitPolicy,
    pub capacity: usize,
    pub height: usize,
    pub nodes: usize,
    pub fat_factor: f64,
    pub build_accesses: u64,
    pub algorithm: Algorithm,
    pub radius: f64,
    pub size: usize,
    pub node_accesses: u64,
    pub wall_ms: Option<f64>,
}

pub fn run_tree_suite(config: &TreeSuiteConfig) -> Result<Vec<TreeRow>> {
    check_seeds(&config.seeds)?;
    check_radii(&[config.radius])?;
    if config.policies.is_empty() || config.capacities.is_empty() {
        return Err(Error::InvalidConfig("tree suite needs at least one policy and one capacity".into()));
    }
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let data = Arc::new(config.dataset.with_seed(seed).generate()?);
        for &policy in &config.policies {
            for &capacity in &config.capacities {
                let tree_config =
                    MTreeConfig { node_capacity: capacity, split_policy: policy, seed, ..Default::default() };
                let tree = MTree::build(data.clone(), config.metric, tree_config)?;
                let stats = tree.stats();
                let start = config.timing.then(Instant::now);
                let (s, _) = solve_with_state(&tree, config.radius, config.algorithm, SolveOptions::default())?;
                let wall_ms = millis(start);
                checked(&data, config.metric, &s.ids, config.radius, config.algorithm.is_disc(), &s.algorithm)?;
                rows.push(TreeRow {
                    seed,
                    dataset: label(&config.dataset),
                    policy,
                    capacity,
                    height: stats.height,
                    nodes: stats.node_count,
                    fat_factor: stats.fat_factor,
                    build_accesses: stats.build_node_accesses,
                    algorithm: config.algorithm,
                    radius: config.radius,
                    size: s.len(),
                    node_accesses: s.access_cost,
                    wall_ms,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_csv<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Mean size and cost per (dataset, algorithm, radius) over seeds: the plot data for
/// size-versus-radius and cost-versus-radius charts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub radius: f64,
    pub runs: usize,
    pub mean_size: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub mean_accesses: f64,
}

pub fn summarize_suite(rows: &[SuiteRow]) -> Vec<SuiteSummary> {
    let mut groups: BTreeMap<(String, String, u64), Vec<&SuiteRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.dataset.clone(), row.algorithm.to_string(), row.radius.to_bits())).or_default().push(row);
    }
    let mut out: Vec<SuiteSummary> = groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            SuiteSummary {
                dataset: g[0].dataset.clone(),
                algorithm: g[0].algorithm,
                radius: g[0].radius,
                runs: g.len(),
                mean_size: g.iter().map(|r| r.size as f64).sum::<f64>() / k,
                min_size: g.iter().map(|r| r.size).min().unwrap(),
                max_size: g.iter().map(|r| r.size).max().unwrap(),
                mean_accesses: g.iter().map(|r| r.node_accesses as f64).sum::<f64>() / k,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.dataset, a.algorithm.to_string())
            .cmp(&(&b.dataset, b.algorithm.to_string()))
            .then(a.radius.total_cmp(&b.radius))
    });
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomSummary {
    pub variant: ZoomVariant,
    pub steps: usize,
    pub mean_adapted_size: f64,
    pub mean_scratch_size: f64,
    pub mean_adapted_accesses: f64,
    pub mean_scratch_accesses: f64,
    pub mean_jaccard_adapted: f64,
    pub mean_jaccard_scratch: f64,
}

pub fn summarize_zoom(rows: &[ZoomRow]) -> Vec<ZoomSummary> {
    let mut groups: BTreeMap<String, Vec<&ZoomRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.variant.to_string()).or_default().push(row);
    }
    groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            let mean = |f: &dyn Fn(&ZoomRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / k;
            ZoomSummary {
                variant: g[0].variant,
                steps: g.len(),
                mean_adapted_size: mean(&|r| r.adapted_size as f64),
                mean_scratch_size: mean(&|r| r.scratch_size as f64),
                mean_adapted_accesses: mean(&|r| r.adapted_accesses as f64),
                mean_scratch_accesses: mean(&|r| r.scratch_accesses as f64),
                mean_jaccard_adapted: mean(&|r| r.jaccard_adapted),
                mean_jaccard_scratch: mean(&|r| r.jaccard_scratch),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub policy: SplitPolicy,
    pub capacity: usize,
    pub runs: usize,
    pub mean_fat_factor: f64,
    pub mean_accesses: f64,
}

pub fn summarize_tree(rows: &[TreeRow]) -> Vec<TreeSummary> {
    let mut groups: BTreeMap<(String, usize), Vec<&TreeRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.policy.to_string(), row.capacity)).or_default().push(row);
    }
    groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            TreeSummary {
                policy: g[0].policy,
                capacity: g[0].capacity,
                runs: g.len(),
                mean_fat_factor: g.iter().map(|r| r.fat_factor).sum::<f64>() / k,
                mean_accesses: g.iter().map(|r| r.node_accesses as f64).sum::<f64>() / k,
            }
        })
        .collect()
}

/// Summarizes a CSV written by any of the suites, recognized by its header.
pub fn report_csv<R: Read>(reader: R) -> Result<String> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or_default();
    let has = |col: &str| header.split(',').any(|c| c == col);
    if has("adapted_size") {
        to_csv_string(&summarize_zoom(&read_csv(text.as_bytes())?))
    } else if has("fat_factor") {
        to_csv_string(&summarize_tree(&read_csv(text.as_bytes())?))
    } else if has("algorithm") && has("size") {
        to_csv_string(&summarize_suite(&read_csv(text.as_bytes())?))
    } else {
        Err(Error::Malformed("not a benchmark CSV".into()))
    }
}
