//! HTTP/JSON facade over the diversification engine.
//!
//! Endpoints are documented in `docs/api.md` at the repository root.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use disc_core::baselines::{quality, QualityReport};
use disc_core::data::{read_csv, CsvKind, GeneratorSpec};
use disc_core::disc::{solve_with_state, verify, Algorithm, DiverseSubset, SolveOptions};
use disc_core::mtree::QueryMode;
use disc_core::zoom::{local_zoom, zoom, zoom_in_from, LocalZoomReport, ZoomDiff, ZoomVariant};
use disc_core::{Dataset, MTree, MTreeConfig, Metric, PointKind};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ApiResult};
pub use store::{ColorCounts, DatasetSummary, Session, Solution, Store};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_POINTS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct Config {
    pub bind: SocketAddr,
    /// Largest dataset accepted, in points.
    pub max_points: usize,
    /// Directory for JSON snapshots; memory only when unset.
    pub persist_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config { bind: DEFAULT_BIND.parse().unwrap(), max_points: DEFAULT_MAX_POINTS, persist_path: None }
    }
}

impl Config {
    /// Reads `DISC_BIND`, `DISC_MAX_POINTS` and `DISC_PERSIST_PATH`.
    pub fn from_env() -> Result<Self, String> {
        let mut config = Config::default();
        if let Ok(bind) = std::env::var("DISC_BIND") {
            config.bind = bind.parse().map_err(|e| format!("DISC_BIND `{bind}`: {e}"))?;
        }
        if let Ok(max) = std::env::var("DISC_MAX_POINTS") {
            config.max_points = max.parse().map_err(|e| format!("DISC_MAX_POINTS `{max}`: {e}"))?;
        }
        if let Ok(path) = std::env::var("DISC_PERSIST_PATH") {
            if !path.is_empty() {
                config.persist_path = Some(path.into());
            }
        }
        Ok(config)
    }
}

pub struct AppState {
    pub store: Store,
    pub max_points: usize,
}

impl AppState {
    pub fn new(config: &Config) -> ApiResult<Self> {
        let store = match &config.persist_path {
            Some(dir) => Store::persistent(dir)?,
            None => Store::in_memory(),
        };
        Ok(AppState { store, max_points: config.max_points })
    }
}

pub fn app(state: Arc<AppState>) -> Router {
    // Roughly 128 bytes per CSV row, never below axum's 2 MB default.
    let body_limit = (state.max_points.saturating_mul(128)).max(2 << 20);
    Router::new()
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/disc", post(solve_dataset))
        .route("/solutions/{id}", get(get_solution))
        .route("/solutions/{id}/zoom", post(zoom_solution))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

type AppStateRef = State<Arc<AppState>>;

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    body.map(|Json(v)| v).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRequest {
    generator: Option<GeneratorSpec>,
    csv: Option<String>,
    #[serde(default)]
    kind: CsvKind,
    /// Min-max normalize uploaded numeric columns; on unless set to false.
    normalize: Option<bool>,
    metric: Option<Metric>,
    tree: Option<MTreeConfig>,
}

/// Query parameters for raw `text/csv` uploads.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadParams {
    #[serde(default)]
    kind: CsvKind,
    normalize: Option<bool>,
    metric: Option<Metric>,
    capacity: Option<usize>,
}

fn default_metric(kind: PointKind) -> Metric {
    match kind {
        PointKind::Numeric => Metric::Euclidean,
        PointKind::Categorical => Metric::Hamming,
    }
}

fn parse_csv(text: &str, kind: CsvKind, normalize: bool, limit: usize) -> ApiResult<Dataset> {
    let rows = text.lines().filter(|l| !l.trim().is_empty()).count().saturating_sub(1);
    if rows > limit {
        return Err(ApiError::too_large(rows, limit));
    }
    Ok(read_csv(text.as_bytes(), kind, normalize)?)
}

async fn create_dataset(
    State(state): AppStateRef,
    params: Result<Query<UploadParams>, QueryRejection>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<(StatusCode, Json<DatasetSummary>)> {
    let body = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv") || v.starts_with("text/plain"));
    let limit = state.max_points;
    let request = if is_csv {
        let params = query(params)?;
        let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("CSV body is not UTF-8"))?;
        DatasetRequest {
            csv: Some(text),
            kind: params.kind,
            normalize: params.normalize,
            metric: params.metric,
            tree: params.capacity.map(MTreeConfig::with_capacity),
            ..Default::default()
        }
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid dataset request: {e}")))?
    };

    let tree_config = request.tree.unwrap_or_default();
    tree_config.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let data = match (request.generator, request.csv) {
        (Some(spec), None) => {
            if spec.n > limit {
                return Err(ApiError::too_large(spec.n, limit));
            }
            blocking(move || spec.generate().map_err(|e| ApiError::bad_request(e.to_string()))).await?
        }
        (None, Some(text)) => {
            let normalize = request.normalize.unwrap_or(true);
            blocking(move || parse_csv(&text, request.kind, normalize, limit)).await?
        }
        _ => return Err(ApiError::bad_request("give exactly one of `generator` and `csv`")),
    };
    let metric = request.metric.unwrap_or_else(|| default_metric(data.kind()));
    metric.check(data.kind()).map_err(|e| ApiError::bad_request(e.to_string()))?;

    let state2 = state.clone();
    let summary = blocking(move || {
        let tree = MTree::build(Arc::new(data), metric, tree_config.clone())?;
        Ok(state2.store.add_dataset(metric, tree_config, tree)?.summary())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_dataset(State(state): AppStateRef, Path(id): Path<u64>) -> ApiResult<Json<DatasetSummary>> {
    Ok(Json(state.store.session(id)?.summary()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscRequest {
    r: f64,
    algorithm: Option<String>,
    query_mode: Option<QueryMode>,
}

/// A stored solution as returned by every solution endpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionView {
    pub solution_id: u64,
    pub dataset_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<u64>,
    pub radius: f64,
    pub algorithm: String,
    pub ids: Vec<usize>,
    pub size: usize,
    pub access_cost: u64,
    pub distance_computations: u64,
    pub independent: bool,
    /// Object counts per color in the final state, when it is held in memory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coloring: Option<ColorCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<ZoomDiff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalZoomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
}

impl SolutionView {
    fn of(s: &Solution) -> Self {
        SolutionView {
            solution_id: s.id,
            dataset_id: s.dataset,
            parent_id: s.parent,
            radius: s.subset.radius,
            algorithm: s.subset.algorithm.clone(),
            ids: s.subset.ids.clone(),
            size: s.subset.len(),
            access_cost: s.subset.access_cost,
            distance_computations: s.subset.distance_computations,
            independent: s.independent,
            coloring: s.coloring.as_ref().map(ColorCounts::of),
            diff: s.diff.clone(),
            local: s.local.clone(),
            quality: None,
        }
    }
}

fn check_radius(name: &str, r: f64) -> ApiResult<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(ApiError::unprocessable(format!("`{name}` must be a positive number, got {r}")))
    }
}

async fn solve_dataset(
    State(state): AppStateRef,
    Path(id): Path<u64>,
    body: Result<Json<DiscRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SolutionView>)> {
    let session = state.store.session(id)?;
    let request = json_body(body)?;
    check_radius("r", request.r)?;
    let algorithm: Algorithm = match &request.algorithm {
        Some(name) => name.parse().map_err(|e: disc_core::Error| ApiError::unprocessable(e.to_string()))?,
        None => Algorithm::GREEDY,
    };
    let opts = SolveOptions { query_mode: request.query_mode.unwrap_or_default() };
    let guard = state.store.lock_dataset(id)?;
    let state2 = state.clone();
    let view = blocking(move || {
        let _guard = guard;
        let (subset, coloring) = solve_with_state(&session.tree, request.r, algorithm, opts)?;
        let v = verify(session.data(), session.metric, &subset.ids, request.r)?;
        if !v.coverage || (algorithm.is_disc() && !v.independence) {
            return Err(disc_core::Error::VerificationFailed(format!("{algorithm} at r = {}", request.r)).into());
        }
        let solution = Solution {
            id: 0,
            dataset: id,
            parent: None,
            subset,
            independent: v.independence,
            diff: None,
            local: None,
            coloring: Some(coloring),
        };
        let stored = state2.store.add_solution(solution)?;
        Ok(SolutionView::of(&stored))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZoomRequest {
    r_prime: f64,
    variant: Option<String>,
    focus: Option<usize>,
}

async fn zoom_solution(
    State(state): AppStateRef,
    Path(id): Path<u64>,
    body: Result<Json<ZoomRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SolutionView>)> {
    let base = state.store.solution(id)?;
    let request = json_body(body)?;
    check_radius("r_prime", request.r_prime)?;
    let r = base.subset.radius;
    if request.r_prime == r {
        return Err(ApiError::unprocessable(format!("`r_prime` equals the solution's radius {r}")));
    }
    if !base.independent {
        return Err(ApiError::unprocessable("only solutions with independent members can be zoomed"));
    }
    if base.local.is_some() && request.focus.is_none() {
        return Err(ApiError::unprocessable(
            "a locally zoomed solution mixes radii and can only be zoomed locally again",
        ));
    }
    let zoom_in = request.r_prime < r;
    let variant = match &request.variant {
        Some(name) => name.parse().map_err(|e: disc_core::Error| ApiError::unprocessable(e.to_string()))?,
        None if zoom_in => ZoomVariant::Greedy,
        None => ZoomVariant::GreedyC,
    };
    let valid = if zoom_in { &ZoomVariant::IN[..] } else { &ZoomVariant::OUT[..] };
    if !valid.contains(&variant) {
        let direction = if zoom_in { "in" } else { "out" };
        return Err(ApiError::unprocessable(format!("variant {variant} does not apply to zooming {direction}")));
    }
    if let Some(focus) = request.focus {
        if !base.subset.contains(focus) {
            return Err(ApiError::unprocessable(format!("focus {focus} is not a member of solution {id}")));
        }
    }

    let guard = state.store.lock_dataset(base.dataset)?;
    let session = state.store.session(base.dataset)?;
    let state2 = state.clone();
    let view = blocking(move || {
        let _guard = guard;
        let tree = &session.tree;
        let r_new = request.r_prime;
        let solution = match request.focus {
            Some(focus) => {
                let out = local_zoom(tree, &base.subset, focus, r_new, variant)?;
                if !out.report.verification.is_disc() {
                    return Err(disc_core::Error::VerificationFailed(format!("local zoom around {focus}")).into());
                }
                Solution {
                    id: 0,
                    dataset: base.dataset,
                    parent: Some(base.id),
                    subset: out.subset,
                    independent: true,
                    diff: Some(out.diff),
                    local: Some(out.report),
                    coloring: None,
                }
            }
            None => {
                // Zooming in resumes from the stored coloring when there is one.
                let out = match (&base.coloring, zoom_in) {
                    (Some(state), true) => zoom_in_from(tree, state.clone(), &base.subset, r_new, variant)?,
                    _ => zoom(tree, &base.subset, r_new, variant)?,
                };
                if !verify(session.data(), session.metric, &out.subset.ids, r_new)?.is_disc() {
                    return Err(disc_core::Error::VerificationFailed(format!("zoom to {r_new}")).into());
                }
                Solution {
                    id: 0,
                    dataset: base.dataset,
                    parent: Some(base.id),
                    subset: out.subset,
                    independent: true,
                    diff: Some(out.diff),
                    local: None,
                    coloring: Some(out.state),
                }
            }
        };
        let stored = state2.store.add_solution(solution)?;
        Ok(SolutionView::of(&stored))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionQuery {
    /// Another solution over the same dataset to compute the Jaccard distance to.
    reference: Option<u64>,
}

async fn get_solution(
    State(state): AppStateRef,
    Path(id): Path<u64>,
    params: Result<Query<SolutionQuery>, QueryRejection>,
) -> ApiResult<Json<SolutionView>> {
    let solution = state.store.solution(id)?;
    let params = query(params)?;
    let reference: Option<DiverseSubset> = match params.reference {
        Some(rid) => {
            let other = state.store.solution(rid)?;
            if other.dataset != solution.dataset {
                return Err(ApiError::unprocessable(format!(
                    "reference {rid} belongs to dataset {}, not {}",
                    other.dataset, solution.dataset
                )));
            }
            Some(other.subset.clone())
        }
        None => None,
    };
    let session = state.store.session(solution.dataset)?;
    let view = blocking(move || {
        let s = &solution.subset;
        let report = quality(session.data(), session.metric, &s.ids, s.radius, reference.as_ref().map(|r| &r.ids[..]))?;
        Ok(SolutionView { quality: Some(report), ..SolutionView::of(&solution) })
    })
    .await?;
    Ok(Json(view))
}
