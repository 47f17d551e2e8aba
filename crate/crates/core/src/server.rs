//! HTTP/JSON service backing the review UI.
//!
//! | route | result |
//! |---|---|
//! | `GET /api/scans` | `[{scan_id, status, position, gender, verdict, thumbnail}]` |
//! | `GET /api/scans/{id}/meta` | dims, spacing, available layers |
//! | `GET /api/scans/{id}/slice?axis=&index=&overlay=none\|labels` | PNG |
//! | `GET /api/scans/{id}/thumbnail` | PNG of the middle axial slice with labels |
//! | `POST /api/scans/{id}/verdict` | body `{"verdict", "note"}`, returns the record |
//!
//! Slices follow the layout and compositing rules of [`crate::render`].
//! Verdict writes are serialised through one lock and appended to the
//! manifest before the response is sent.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Error;
use crate::manifest::{apply_verdict, Manifest};
use crate::nifti;
use crate::record::{Gender, Position, ScanRecord, ScanStatus, Verdict};
use crate::render;
use crate::volume::{LabelMap, Volume};

type Loaded = (String, Arc<Volume>, Option<Arc<LabelMap>>);

pub struct AppState {
    manifest: Mutex<Manifest>,
    cfg: PipelineConfig,
    static_dir: Option<PathBuf>,
    /// Last scan served, so scrubbing through slices does not reload it.
    cache: Mutex<Option<Loaded>>,
}

impl AppState {
    pub fn new(manifest: Manifest, cfg: PipelineConfig, static_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState { manifest: Mutex::new(manifest), cfg, static_dir, cache: Mutex::new(None) })
    }

    fn record(&self, id: &str) -> Result<ScanRecord, ApiError> {
        let m = self.manifest.lock().expect("manifest lock");
        m.record(id).cloned().ok_or_else(|| Error::UnknownScan(id.to_string()).into())
    }

    fn load(&self, id: &str) -> Result<Loaded, ApiError> {
        if let Some(hit) = self.cache.lock().expect("cache lock").as_ref().filter(|c| c.0 == id) {
            return Ok(hit.clone());
        }
        let rec = self.record(id)?;
        let image = rec.paths.image.as_ref().ok_or_else(|| ApiError::not_found(format!("scan {id} has no image")))?;
        let v = Arc::new(nifti::load_volume(image)?);
        let labels = match &rec.paths.labels {
            Some(p) => Some(Arc::new(nifti::load_labelmap(p)?)),
            None => None,
        };
        let loaded = (id.to_string(), v, labels);
        *self.cache.lock().expect("cache lock") = Some(loaded.clone());
        Ok(loaded)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, message }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownScan(_) => StatusCode::NOT_FOUND,
            Error::VerdictConflict { .. } => StatusCode::CONFLICT,
            Error::InvalidGeometry(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanListItem {
    pub scan_id: String,
    pub status: ScanStatus,
    pub position: Option<Position>,
    pub gender: Option<Gender>,
    pub verdict: Option<Verdict>,
    pub thumbnail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub scan_id: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub layers: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct SliceQuery {
    pub axis: usize,
    pub index: usize,
    #[serde(default)]
    pub overlay: Overlay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlay {
    #[default]
    None,
    Labels,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictBody {
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/scans", get(list_scans))
        .route("/api/scans/{id}/meta", get(scan_meta))
        .route("/api/scans/{id}/slice", get(scan_slice))
        .route("/api/scans/{id}/thumbnail", get(scan_thumbnail))
        .route("/api/scans/{id}/verdict", post(post_verdict))
        .route("/", get(static_index))
        .route("/{*path}", get(static_file))
        .with_state(state)
}

async fn list_scans(State(s): State<Arc<AppState>>) -> Json<Vec<ScanListItem>> {
    let m = s.manifest.lock().expect("manifest lock");
    Json(
        m.records()
            .map(|r| ScanListItem {
                scan_id: r.scan_id.clone(),
                status: r.status,
                position: r.position,
                gender: r.gender,
                verdict: r.verdict,
                thumbnail: format!("/api/scans/{}/thumbnail", r.scan_id),
            })
            .collect(),
    )
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })?
}

async fn scan_meta(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<ScanMeta>, ApiError> {
    blocking(move || {
        let (_, v, labels) = s.load(&id)?;
        let mut layers = vec!["image".to_string()];
        if labels.is_some() {
            layers.push("labels".to_string());
        }
        Ok(Json(ScanMeta { scan_id: id, dims: v.dims(), spacing: v.spacing(), layers }))
    })
    .await
}

async fn scan_slice(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SliceQuery>,
) -> Result<Response, ApiError> {
    let png = blocking(move || {
        let (_, v, labels) = s.load(&id)?;
        let overlay = match q.overlay {
            Overlay::None => None,
            Overlay::Labels => labels.as_deref(),
        };
        let img = render::slice_rgb(&v, overlay, q.axis, q.index, s.cfg.windowing_hu)?;
        Ok(render::encode_png(img)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn scan_thumbnail(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let png = blocking(move || {
        let (_, v, labels) = s.load(&id)?;
        let img = render::slice_rgb(&v, labels.as_deref(), 2, v.dims()[2] / 2, s.cfg.windowing_hu)?;
        Ok(render::encode_png(img)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn post_verdict(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<VerdictBody>,
) -> Result<Json<ScanRecord>, ApiError> {
    blocking(move || {
        let mut m = s.manifest.lock().expect("manifest lock");
        let rec = apply_verdict(&mut m, &id, body.verdict, &body.note, &s.cfg.hash())?;
        log::info!("verdict {:?} on {id}", body.verdict);
        Ok(Json(rec))
    })
    .await
}

async fn static_index(State(s): State<Arc<AppState>>) -> Response {
    serve_static(&s, "index.html")
}

async fn static_file(State(s): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Response {
    serve_static(&s, &path)
}

fn serve_static(s: &AppState, rel: &str) -> Response {
    let Some(root) = &s.static_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = root.join(rel);
    let Ok(bytes) = std::fs::read(&path) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    };
    ([(header::CONTENT_TYPE, mime)], bytes).into_response()
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::PortUnavailable { port: addr.port(), reason: e.to_string() })?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
