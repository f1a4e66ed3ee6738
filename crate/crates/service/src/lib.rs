//! HTTP session API over the segmenter.

pub mod error;
pub mod session;
pub mod strokes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use seeded_laplacian::eval::{confusion, jaccard};
use seeded_laplacian::image::{render_overlay, ImageRgb, Mask};
use seeded_laplacian::segment::{SegmentationResult, SegmenterParams, SessionState, StageTimings};

pub use error::ApiError;
pub use session::{Session, SessionStore, DEFAULT_TTL};
pub use strokes::{rasterize, ParamOverrides, Stroke, StrokeLabel, StrokePayload};

pub const MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;
pub const DEFAULT_PORT: u16 = 8742;
const SWEEP_EVERY: Duration = Duration::from_secs(60);

#[derive(Debug)]
pub struct AppState {
    pub store: SessionStore,
    /// Defaults for every new segmentation before per-request overrides.
    pub defaults: SegmenterParams,
}

impl AppState {
    pub fn new(defaults: SegmenterParams, ttl: Duration) -> Self {
        Self {
            store: SessionStore::new(ttl),
            defaults,
        }
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new(SegmenterParams::default(), DEFAULT_TTL)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PostMode {
    Replace,
    #[default]
    Append,
}

#[derive(Debug, Deserialize)]
struct StrokeQuery {
    #[serde(default)]
    mode: PostMode,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub id: String,
    pub mode: PostMode,
    pub mask_url: String,
    pub overlay_url: String,
    /// Against the attached ground truth, if any.
    pub jaccard: Option<f64>,
    /// Request wall time.
    pub seconds: f64,
    pub foreground_pixels: usize,
    pub pivots: usize,
    pub ridge: bool,
    pub shortfall: bool,
    pub skipped_scales: Vec<f64>,
    pub timings: StageTimings,
}

impl Summary {
    fn new(id: &str, mode: PostMode, r: &SegmentationResult, gt: Option<&Mask>, seconds: f64) -> Self {
        let jaccard = gt.and_then(|g| confusion(&r.mask, g).ok()).map(|c| jaccard(&c));
        Self {
            id: id.to_string(),
            mode,
            mask_url: format!("/sessions/{id}/mask.png"),
            overlay_url: format!("/sessions/{id}/overlay.png"),
            jaccard,
            seconds,
            foreground_pixels: r.mask.foreground_count(),
            pivots: r.pivot_count,
            ridge: r.ridge,
            shortfall: r.shortfall,
            skipped_scales: r.skipped_scales.clone(),
            timings: r.timings,
        }
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route(
            "/sessions",
            post(create_session).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)),
        )
        .route("/sessions/{id}/strokes", post(post_strokes))
        .route(
            "/sessions/{id}/groundtruth",
            post(attach_groundtruth).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)),
        )
        .route("/sessions/{id}/mask.png", get(get_mask))
        .route("/sessions/{id}/overlay.png", get(get_overlay))
        .route("/healthz", get(healthz))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Port from `SL_PORT`, else the default.
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var("SL_PORT") {
        Ok(v) => v.trim().parse().map_err(|_| format!("SL_PORT is not a port number: {v:?}")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

/// Serves until ctrl-c, sweeping idle sessions in the background.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(SWEEP_EVERY);
            loop {
                tick.tick().await;
                let n = state.store.sweep(Instant::now());
                if n > 0 {
                    tracing::debug!(expired = n, "swept sessions");
                }
            }
        })
    };
    let app = router(state, static_dir);
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    state.store.get(id).ok_or(ApiError::NotFound)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let image = tokio::task::spawn_blocking(move || ImageRgb::decode_png(&body))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let (width, height) = image.dims();
    let s = state.store.insert(image);
    tracing::info!(id = %s.id, width, height, "session created");
    let body = Created {
        id: s.id.clone(),
        width,
        height,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn attach_groundtruth(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    let s = lookup(&state, &id)?;
    let gt = Mask::decode_png(&body)?;
    if gt.dims() != s.image.dims() {
        return Err(seeded_laplacian::Error::Dimension {
            expected: s.image.dims(),
            found: gt.dims(),
        }
        .into());
    }
    s.data().gt = Some(gt);
    Ok(StatusCode::NO_CONTENT)
}

async fn post_strokes(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StrokeQuery>,
    Json(payload): Json<StrokePayload>,
) -> Result<Json<Summary>, ApiError> {
    let s = lookup(&state, &id)?;
    let claim = s
        .try_claim()
        .ok_or_else(|| ApiError::Conflict("a computation is already running for this session".into()))?;
    let defaults = state.defaults.clone();
    let summary = tokio::task::spawn_blocking(move || compute(&claim, q.mode, &payload, defaults))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(summary))
}

fn compute(claim: &session::Claim, mode: PostMode, payload: &StrokePayload, defaults: SegmenterParams) -> Result<Summary, ApiError> {
    let started = Instant::now();
    let s = claim.session();
    let (w, h) = s.image.dims();
    let scribbles = rasterize(&payload.strokes, w, h).map_err(ApiError::Unprocessable)?;
    let (existing, gt) = {
        let mut d = s.data();
        let existing = match mode {
            PostMode::Replace => None,
            PostMode::Append => d.state.take(),
        };
        (existing, d.gt.clone())
    };
    let outcome = match existing {
        Some(mut st) => {
            let out = check_overrides(payload.params.as_ref(), st.params())
                .and_then(|()| st.refine(&scribbles).cloned().map_err(ApiError::from));
            let mask = out.as_ref().ok().map(|r| r.mask.clone());
            put_back(s, st, mask);
            out
        }
        None => {
            let params = match &payload.params {
                Some(o) => o.apply(defaults)?,
                None => defaults,
            };
            let st = SessionState::start(&s.image, &scribbles, &params)?;
            let r = st.last().clone();
            put_back(s, st, Some(r.mask.clone()));
            Ok(r)
        }
    };
    let r = outcome?;
    let summary = Summary::new(&s.id, mode, &r, gt.as_ref(), started.elapsed().as_secs_f64());
    tracing::info!(id = %s.id, ?mode, seconds = summary.seconds, pivots = summary.pivots, "segmented");
    Ok(summary)
}

fn put_back(s: &Session, st: SessionState, mask: Option<Mask>) {
    let mut d = s.data();
    d.state = Some(st);
    if let Some(m) = mask {
        d.mask = Some(m);
    }
}

fn check_overrides(o: Option<&ParamOverrides>, current: &SegmenterParams) -> Result<(), ApiError> {
    let Some(o) = o else {
        return Ok(());
    };
    if &o.apply(current.clone())? != current {
        return Err(ApiError::BadRequest(
            "parameters can only change with mode=replace".into(),
        ));
    }
    Ok(())
}

fn result_of(s: &Session) -> Result<(Mask, Option<Mask>), ApiError> {
    let d = s.data();
    let mask = d
        .mask
        .clone()
        .ok_or_else(|| ApiError::Conflict("no segmentation yet; post strokes first".into()))?;
    Ok((mask, d.gt.clone()))
}

async fn get_mask(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = lookup(&state, &id)?;
    let (mask, _) = result_of(&s)?;
    Ok(png(mask.encode_png()))
}

async fn get_overlay(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = lookup(&state, &id)?;
    let (mask, gt) = result_of(&s)?;
    let image = s.image.clone();
    let bytes = tokio::task::spawn_blocking(move || render_overlay(&image, &mask, gt.as_ref()).map(|o| o.encode_png()))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(png(bytes))
}
