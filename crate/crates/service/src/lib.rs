//! HTTP sessions for interactive pruning: upload a tree, inspect its light
//! field, try cuts without committing them, accept or undo cuts and ask for
//! suggestions.
//!
//! Every session keeps its original cloud and the ordered list of accepted
//! cuts. The current cloud is always what replaying those cuts on the
//! original produces, with the trunk pinned to where it was found in the
//! original. Scores are normalized over the pair {original, variant}.

mod error;
mod session;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use canopy_core::geometry::io::{encode_cloud, parse_cloud, write_atomic};
use canopy_core::geometry::CloudFormat;
use canopy_core::suggest::{suggest_with, SuggestionSet};
use canopy_core::{CutSpec, PipelineConfig, ScoreReport, Vec3};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
pub use session::{replay, Session, Variant};

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Directory for per-tree snapshots; none keeps sessions in memory only.
    pub snapshot_dir: Option<PathBuf>,
    /// Static UI bundle served for every path the API does not claim.
    pub ui_dir: Option<PathBuf>,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

pub struct AppState {
    config: Arc<PipelineConfig>,
    sessions: RwLock<BTreeMap<u64, Arc<Session>>>,
    next_id: AtomicU64,
    snapshot_dir: Option<PathBuf>,
}

type Shared = Arc<AppState>;

impl AppState {
    pub fn new(config: PipelineConfig, snapshot_dir: Option<PathBuf>) -> canopy_core::Result<Self> {
        config.validate()?;
        config.sky()?;
        Ok(Self {
            config: Arc::new(config),
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            snapshot_dir,
        })
    }

    fn session(&self, id: u64) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no tree with id {id}")))
    }

    fn snapshot(&self, session: &Session) {
        let Some(dir) = &self.snapshot_dir else { return };
        let current = session.current();
        let doc = serde_json::json!({ "id": session.id, "history": current.history });
        let path = dir.join(format!("tree-{}.json", session.id));
        if let Err(e) = write_atomic(&path, serde_json::to_string_pretty(&doc).unwrap_or_default().as_bytes()) {
            log::warn!("snapshot for tree {} failed: {e}", session.id);
        }
    }
}

pub fn router(config: PipelineConfig, options: ServiceOptions) -> canopy_core::Result<Router> {
    let state = Arc::new(AppState::new(config, options.snapshot_dir.clone())?);
    let cors = match &options.cors_origin {
        Some(origin) => {
            let value = HeaderValue::from_str(origin)
                .map_err(|e| canopy_core::Error::param("cors_origin", e.to_string()))?;
            CorsLayer::new().allow_origin(AllowOrigin::exact(value))
        }
        None => CorsLayer::new().allow_origin(AllowOrigin::any()),
    }
    .allow_methods([axum::http::Method::GET, axum::http::Method::POST, axum::http::Method::DELETE])
    .allow_headers([header::CONTENT_TYPE]);

    let api = Router::new()
        .route("/trees", post(create_tree))
        .route("/trees/{id}", get(get_tree))
        .route("/trees/{id}/lightfield", get(lightfield))
        .route("/trees/{id}/simulate", post(simulate))
        .route("/trees/{id}/cuts", post(accept_cut))
        .route("/trees/{id}/cuts/last", delete(undo_cut))
        .route("/trees/{id}/suggestions", get(suggestions))
        .with_state(state);
    let app = match options.ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    Ok(app.layer(cors))
}

/// Serves `app` on `addr` until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    format: Option<CloudFormat>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub points: usize,
}

async fn create_tree(
    State(state): State<Shared>,
    Query(q): Query<UploadQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let format = q.format.unwrap_or_else(|| {
        match headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()) {
            Some(t) if t.starts_with("application/octet-stream") => CloudFormat::BinaryXyz,
            _ => CloudFormat::CsvAscii,
        }
    });
    if body.is_empty() {
        return Err(ApiError::bad_request("empty_body", "request body holds no point cloud"));
    }
    let cloud = parse_cloud(&body, format).map_err(ApiError::from)?;
    if cloud.is_empty() {
        return Err(canopy_core::Error::EmptyCloud.into());
    }
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let points = cloud.len();
    if let Some(dir) = &state.snapshot_dir {
        let path = dir.join(format!("tree-{id}.csv"));
        write_atomic(&path, &encode_cloud(&cloud, CloudFormat::CsvAscii)).map_err(ApiError::from)?;
    }
    let session = Arc::new(Session::new(id, cloud, state.config.clone()));
    state.sessions.write().expect("session table poisoned").insert(id, session.clone());
    state.snapshot(&session);
    Ok((StatusCode::CREATED, Json(Created { id, points })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TreeSummary {
    pub id: u64,
    pub points: usize,
    pub original_points: usize,
    pub history: Vec<CutSpec>,
    pub history_len: usize,
    pub report: ScoreReport,
}

async fn get_tree(State(state): State<Shared>, Path(id): Path<u64>) -> Result<Json<TreeSummary>, ApiError> {
    let session = state.session(id)?;
    blocking(move || {
        let current = session.current();
        let report = session.report(&current)?;
        Ok(Json(TreeSummary {
            id,
            points: current.cloud.len(),
            original_points: session.original().cloud.len(),
            history: current.history.clone(),
            history_len: current.history.len(),
            report,
        }))
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelLight {
    pub cell: [i64; 3],
    pub centroid: [f64; 3],
    pub absorbed: f64,
    pub p: f64,
    pub d_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightFieldResponse {
    pub voxel_size: f64,
    pub voxels: Vec<VoxelLight>,
}

async fn lightfield(State(state): State<Shared>, Path(id): Path<u64>) -> Result<Json<LightFieldResponse>, ApiError> {
    let session = state.session(id)?;
    blocking(move || {
        let current = session.current();
        let a = current.analysis(&session.config)?;
        let voxels = a
            .grid
            .cells
            .iter()
            .map(|(idx, cell)| VoxelLight {
                cell: [idx.ix, idx.iy, idx.iz],
                centroid: [cell.centroid.x, cell.centroid.y, cell.centroid.z],
                absorbed: a.field.absorbed.get(idx).copied().unwrap_or(0.0),
                p: a.field.p.get(idx).copied().unwrap_or(0.0),
                d_i: a.distribution.per_voxel.get(idx).copied().unwrap_or(0.0),
            })
            .collect();
        Ok(Json(LightFieldResponse {
            voxel_size: a.grid.voxel_size,
            voxels,
        }))
    })
    .await
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutRequest {
    pub location: [f64; 3],
    pub cut_radius: Option<f64>,
}

impl CutRequest {
    fn spec(&self, config: &PipelineConfig) -> CutSpec {
        CutSpec::new(Vec3::from(self.location), self.cut_radius.unwrap_or_else(|| config.cut_radius()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDelta {
    #[serde(rename = "D")]
    pub d: f64,
    pub v_norm: f64,
    pub l_norm: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub removed_point_indices: Vec<usize>,
    pub removed_count: usize,
    pub kept_count: usize,
    /// Score of the tree after this cut.
    pub report: ScoreReport,
    /// Score of the tree as it stands.
    pub current: ScoreReport,
    pub delta: ScoreDelta,
}

fn delta(after: &ScoreReport, before: &ScoreReport) -> ScoreDelta {
    ScoreDelta {
        d: after.d - before.d,
        v_norm: after.v_norm - before.v_norm,
        l_norm: after.l_norm - before.l_norm,
        s: after.s - before.s,
    }
}

async fn simulate(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<CutRequest>,
) -> Result<Json<SimulateResponse>, ApiError> {
    let session = state.session(id)?;
    blocking(move || {
        let current = session.current();
        let cut = req.spec(&session.config);
        let trial = session.try_cut(&current, cut)?;
        let before = session.report(&current)?;
        let after = session.report(&trial.variant)?;
        Ok(Json(SimulateResponse {
            removed_count: trial.removed_point_indices.len(),
            removed_point_indices: trial.removed_point_indices,
            kept_count: trial.variant.cloud.len(),
            delta: delta(&after, &before),
            report: after,
            current: before,
        }))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub history_len: usize,
    pub points: usize,
    pub report: ScoreReport,
}

async fn accept_cut(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<CutRequest>,
) -> Result<Json<HistoryResponse>, ApiError> {
    let session = state.session(id)?;
    let _writer = session.writer.lock().await;
    let s = session.clone();
    let out = blocking(move || {
        let current = s.current();
        let trial = s.try_cut(&current, req.spec(&s.config))?;
        let report = s.report(&trial.variant)?;
        let history_len = trial.variant.history.len();
        let points = trial.variant.cloud.len();
        s.set_current(trial.variant);
        Ok(HistoryResponse {
            history_len,
            points,
            report,
        })
    })
    .await?;
    state.snapshot(&session);
    Ok(Json(out))
}

async fn undo_cut(State(state): State<Shared>, Path(id): Path<u64>) -> Result<Json<HistoryResponse>, ApiError> {
    let session = state.session(id)?;
    let _writer = session.writer.lock().await;
    let s = session.clone();
    let out = blocking(move || {
        let current = s.current();
        let Some((_, earlier)) = current.history.split_last() else {
            return Err(ApiError::conflict("empty_history", "no accepted cut to undo"));
        };
        let variant = replay(&s, earlier)?;
        let report = s.report(&variant)?;
        let out = HistoryResponse {
            history_len: variant.history.len(),
            points: variant.cloud.len(),
            report,
        };
        s.set_current(variant);
        Ok(out)
    })
    .await?;
    state.snapshot(&session);
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct SuggestQuery {
    k: Option<usize>,
}

async fn suggestions(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    Query(q): Query<SuggestQuery>,
) -> Result<Json<SuggestionSet>, ApiError> {
    let session = state.session(id)?;
    let k = q.k.unwrap_or(session.config.k);
    if k == 0 {
        return Err(canopy_core::Error::param("k", "must be at least 1").into());
    }
    blocking(move || {
        let current = session.current();
        let analysis = current.analysis(&session.config)?;
        let structure = session.structure(&current)?;
        let set = suggest_with(&current.cloud, analysis, structure, &session.config, k)?;
        Ok(Json(set))
    })
    .await
}
