//! HTTP job service for interactive segmentation: an image per session,
//! scribbles painted by the client, asynchronous solves on a worker pool and
//! 16-bit probability maps the client can rethreshold locally.

mod openapi;
pub mod store;
pub mod strokes;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use otseg_core::io;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use store::{ServiceConfig, SolveRequest};
use store::{Session, Shared};
use strokes::StrokeList;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    UnsupportedMedia(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::UnsupportedMedia(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            Self::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn no_session(id: &str) -> ApiError {
    ApiError::NotFound(format!("no session {id}"))
}

/// Handle on the service state; clones share it.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self(Arc::new(Shared::new(config)))
    }

    /// Drops idle sessions now; returns how many went.
    pub fn expire_idle(&self) -> usize {
        self.0.lock().expire(self.0.config.session_ttl)
    }

    /// Periodic expiry on the current tokio runtime.
    pub fn spawn_sweeper(&self) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        let every = (self.0.config.session_ttl / 4).clamp(std::time::Duration::from_secs(1), std::time::Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                let n = state.expire_idle();
                if n > 0 {
                    tracing::info!(sessions = n, "expired idle sessions");
                }
            }
        })
    }
}

pub fn router(state: AppState) -> Router {
    let origin = match &state.0.config.cors_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).expect("valid origin header")),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE])
        .expose_headers([header::HeaderName::from_static("x-phases")]);
    let limit = state.0.config.max_upload_bytes;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/scribbles", put(put_scribbles).get(get_scribbles))
        .route("/sessions/{id}/solve", post(solve))
        .route("/sessions/{id}/result", get(get_result))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/spec", get(|| async { Json(openapi::document()) }))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let image = io::decode_image(&body).map_err(|e| match e {
        otseg_core::Error::InvalidParameter(m) => ApiError::Unprocessable(m),
        other => ApiError::UnsupportedMedia(format!("unreadable image: {other}")),
    })?;
    let (w, h) = (image.width, image.height);
    let id = store::new_id();
    state.0.lock().sessions.insert(id.clone(), Session::new(image));
    tracing::info!(session = %id, width = w, height = h, "session created");
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "width": w, "height": h }))))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let mut store = state.0.lock();
    let s = store.session(&id).ok_or_else(|| no_session(&id))?;
    Ok(Json(s.to_json(&id)))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> StatusCode {
    state.0.lock().remove_session(&id);
    StatusCode::NO_CONTENT
}

fn content_type(headers: &HeaderMap) -> &str {
    headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("")
}

/// A PNG mask replaces the scribbles; a JSON stroke list is painted over
/// them (or over an empty mask with `"clear": true`).
async fn put_scribbles(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let ct = content_type(&headers);
    if ct.starts_with("application/json") {
        let list: StrokeList =
            serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(format!("stroke list: {e}")))?;
        let mut store = state.0.lock();
        let s = store.session(&id).ok_or_else(|| no_session(&id))?;
        let (w, h) = (s.image.width, s.image.height);
        if list.clear {
            s.mask.fill(0);
            s.strokes.clear();
        }
        for stroke in &list.strokes {
            strokes::rasterize(&mut s.mask, w, h, stroke);
        }
        if list.clear || !list.strokes.is_empty() {
            s.strokes.extend(list.strokes);
            s.modified();
        }
        return Ok(StatusCode::NO_CONTENT);
    }
    if ct.starts_with("image/") || ct == "application/octet-stream" {
        let mask = io::decode_scribbles(&body).map_err(|e| ApiError::UnsupportedMedia(format!("scribble mask: {e}")))?;
        let mut store = state.0.lock();
        let s = store.session(&id).ok_or_else(|| no_session(&id))?;
        if (mask.width, mask.height) != (s.image.width, s.image.height) {
            return Err(ApiError::Unprocessable(format!(
                "{}x{} mask for a {}x{} image",
                mask.width, mask.height, s.image.width, s.image.height
            )));
        }
        s.mask = mask.to_indexed();
        s.strokes.clear();
        s.modified();
        return Ok(StatusCode::NO_CONTENT);
    }
    Err(ApiError::UnsupportedMedia(format!("scribbles must be image/png or application/json, got `{ct}`")))
}

#[derive(Debug, Default, Deserialize)]
struct ScribbleQuery {
    format: Option<String>,
}

async fn get_scribbles(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ScribbleQuery>,
) -> ApiResult<Response> {
    let mut store = state.0.lock();
    let s = store.session(&id).ok_or_else(|| no_session(&id))?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(json!({
            "width": s.image.width,
            "height": s.image.height,
            "labels": s.labels(),
            "strokes": s.strokes,
        }))
        .into_response()),
        Some("png") => {
            let png = io::encode_scribbles(&s.scribbles()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
        }
        Some(other) => Err(ApiError::BadRequest(format!("unknown format `{other}`"))),
    }
}

async fn solve(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let request: SolveRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SolveRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(format!("solve config: {e}")))?
    };
    request.solver.validate().map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let mut store = state.0.lock();
    let labels = store.session(&id).ok_or_else(|| no_session(&id))?.labels();
    if labels < 2 {
        return Err(ApiError::Conflict(format!(
            "segmentation needs scribbles for at least two labels; this session has {labels}"
        )));
    }
    let job_id = store::submit(&state.0, &mut store, &id, request);
    tracing::info!(session = %id, job = %job_id, "solve queued");
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let store = state.0.lock();
    let job = store.jobs.get(&id).ok_or_else(|| ApiError::NotFound(format!("no job {id}")))?;
    Ok(Json(job.to_json(&id)))
}

async fn cancel_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let mut store = state.0.lock();
    store.cancel(&id);
    let job = store.jobs.get(&id).ok_or_else(|| ApiError::NotFound(format!("no job {id}")))?;
    Ok(Json(job.to_json(&id)))
}

#[derive(Debug, Deserialize)]
struct ResultQuery {
    format: Option<String>,
    threshold: Option<f64>,
    phase: Option<usize>,
}

/// `prob16` (default) returns one phase map (`phase`, default 0; the
/// `X-Phases` header gives the count); `labels` thresholds at `threshold`,
/// defaulting to the solve's own.
async fn get_result(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> ApiResult<Response> {
    let result = {
        let mut store = state.0.lock();
        store.session(&id).ok_or_else(|| no_session(&id))?;
        store.result(&id).ok_or_else(|| ApiError::NotFound(format!("session {id} has no result")))?
    };
    let phases = result.maps.len();
    let (w, h) = (result.width, result.height);
    let png = match q.format.as_deref().unwrap_or("prob16") {
        "prob16" => {
            let k = q.phase.unwrap_or(0);
            let map = result.maps.get(k).ok_or_else(|| ApiError::BadRequest(format!("phase {k} of {phases}")))?;
            io::encode_prob16(w, h, map)
        }
        "labels" => {
            let t = q.threshold.unwrap_or(result.threshold);
            if !(t > 0.0 && t < 1.0) {
                return Err(ApiError::BadRequest(format!("threshold must lie in (0, 1), got {t}")));
            }
            io::encode_labels(w, h, &io::quantized_labels(&result.maps, t))
        }
        other => return Err(ApiError::BadRequest(format!("unknown format `{other}`"))),
    }
    .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
            (header::HeaderName::from_static("x-phases"), HeaderValue::from(phases)),
            (header::HeaderName::from_static("x-job"), HeaderValue::from_str(&result.job).expect("hex id")),
        ],
        png,
    )
        .into_response())
}
