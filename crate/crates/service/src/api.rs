use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use base64::Engine;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tokio::sync::{Mutex as AsyncMutex, OwnedRwLockReadGuard, OwnedRwLockWriteGuard, RwLock};

use footprint_core::geo::{circle_radius_px, DayAnalysis};
use footprint_core::ingest::IngestError;
use footprint_core::model::{DayWindow, ImageSample, Timestamp};
use footprint_core::pipeline::{process_day, ChannelTexts, PipelineError, PipelineParams};
use footprint_core::reconstruction::{export_episodes, EpisodeInput, ExportFormat, ReconstructionError, ReconstructionSession};
use footprint_core::timeline::{frame_sequence, select_window, Frame, TimelineError, WindowPlace, WindowSelection};

use crate::store::{content_type_for, MediaFile, Store, StoreError};

pub const CIRCLE_MIN_PX: f64 = 6.0;
pub const CIRCLE_MAX_PX: f64 = 40.0;

type SessionKey = (NaiveDate, String);

#[derive(Default)]
struct Locks {
    days: Mutex<HashMap<NaiveDate, Arc<RwLock<()>>>>,
    sessions: Mutex<HashMap<SessionKey, Arc<AsyncMutex<()>>>>,
}

impl Locks {
    fn day(&self, date: NaiveDate) -> Arc<RwLock<()>> {
        self.days.lock().unwrap().entry(date).or_default().clone()
    }

    fn session(&self, date: NaiveDate, id: &str) -> Arc<AsyncMutex<()>> {
        self.sessions.lock().unwrap().entry((date, id.to_string())).or_default().clone()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Store,
    pub params: PipelineParams,
    pub clock: fn() -> Timestamp,
    locks: Arc<Locks>,
}

fn wall_clock() -> Timestamp {
    Timestamp::from_millis(chrono::Utc::now().timestamp_millis())
}

impl AppState {
    pub fn new(store: Store, params: PipelineParams) -> Self {
        AppState { store, params, clock: wall_clock, locks: Arc::default() }
    }

    async fn day_write(&self, date: NaiveDate) -> OwnedRwLockWriteGuard<()> {
        self.locks.day(date).write_owned().await
    }

    async fn day_read(&self, date: NaiveDate) -> OwnedRwLockReadGuard<()> {
        self.locks.day(date).read_owned().await
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/days", get(list_days))
        .route("/api/days/{date}", post(ingest).get(day_summary))
        .route("/api/days/{date}/timeline", get(timeline))
        .route("/api/days/{date}/analysis", get(analysis))
        .route("/api/days/{date}/window", get(window))
        .route("/api/media/{date}/{media_id}", get(media))
        .route("/api/days/{date}/sessions", post(create_session).get(list_sessions))
        .route("/api/days/{date}/sessions/{id}", get(get_session))
        .route("/api/days/{date}/sessions/{id}/episodes", post(append_episode))
        .route("/api/days/{date}/sessions/{id}/episodes/last", put(amend_last))
        .route("/api/days/{date}/sessions/{id}/finalize", post(finalize))
        .route("/api/days/{date}/sessions/{id}/export", get(export))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl ToString) -> Self {
        ApiError { status, body: json!({ "error": error, "message": message.to_string() }) }
    }

    fn bad_request(message: impl ToString) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::AlreadyIngested(_) => ApiError::new(StatusCode::CONFLICT, "already_ingested", e),
            StoreError::UnknownDay(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_day", e),
            StoreError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", e),
            StoreError::Corrupt { .. } | StoreError::Io(_) => {
                tracing::error!("store failure: {e}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e)
            }
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let (channel, source) = match &e {
            PipelineError::Parse { channel, source } => (Some(*channel), Some(source)),
            PipelineError::Ingest(source) => (None, Some(source)),
            _ => (None, None),
        };
        let kind = match source {
            Some(IngestError::EmptyDay) => "empty_day",
            Some(_) => "parse_error",
            None => "analysis_error",
        };
        let mut body = json!({ "error": kind, "message": e.to_string() });
        if let Some(channel) = channel {
            body["channel"] = json!(channel);
        }
        if let Some(source) = source {
            body["detail"] = serde_json::to_value(source).unwrap_or_default();
        }
        ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, body }
    }
}

impl From<ReconstructionError> for ApiError {
    fn from(e: ReconstructionError) -> Self {
        let status = match e {
            ReconstructionError::ChronologyViolation { .. }
            | ReconstructionError::SessionFinalized
            | ReconstructionError::EmptySession => StatusCode::CONFLICT,
            ReconstructionError::OutOfDay { .. } | ReconstructionError::InvalidEpisode { .. } => StatusCode::BAD_REQUEST,
        };
        let mut body = serde_json::to_value(&e).unwrap_or_default();
        body["message"] = json!(e.to_string());
        ApiError { status, body }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_date(raw: &str) -> ApiResult<NaiveDate> {
    raw.parse().map_err(|_| ApiError::bad_request(format!("invalid date {raw:?}")))
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn json_response(status: StatusCode, value: &impl Serialize) -> Response {
    (status, axum::Json(value)).into_response()
}

fn entity_tag(bytes: &[u8]) -> String {
    format!("\"{}\"", hex::encode(Sha256::digest(bytes)))
}

fn etag_matches(headers: &HeaderMap, tag: &str) -> bool {
    headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == tag || t.trim() == "*"))
}

/// A stored document with a strong entity tag.
fn cached_document(headers: &HeaderMap, body: Vec<u8>, content_type: &'static str, cache_control: &'static str) -> Response {
    let tag = entity_tag(&body);
    let mut response = if etag_matches(headers, &tag) {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        (StatusCode::OK, [(header::CONTENT_TYPE, content_type)], Body::from(body)).into_response()
    };
    let h = response.headers_mut();
    h.insert(header::ETAG, HeaderValue::from_str(&tag).unwrap());
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static(cache_control));
    response
}

async fn list_days(State(state): State<AppState>) -> ApiResult<Response> {
    let days = state.store.list_days()?;
    Ok(json_response(StatusCode::OK, &days))
}

/// Body of `POST /api/days/{date}`: channel documents as text, optional
/// base64 media keyed by image manifest path.
#[derive(Debug, Deserialize)]
pub struct IngestRequest {
    #[serde(default)]
    pub tz_offset_minutes: i32,
    #[serde(flatten)]
    pub texts: ChannelTexts,
    #[serde(default)]
    pub media: BTreeMap<String, String>,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Deserialize)]
struct ForceQuery {
    force: Option<bool>,
}

async fn ingest(
    State(state): State<AppState>,
    Path(date): Path<String>,
    Query(query): Query<ForceQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let req: IngestRequest = parse_json(&body)?;
    if req.texts.gps.is_none() && req.texts.context.is_none() && req.texts.images.is_none() {
        return Err(ApiError::bad_request("at least one of gps, context, images is required"));
    }
    let force = req.force || query.force.unwrap_or(false);
    let mut media = Vec::with_capacity(req.media.len());
    for (path, encoded) in req.media {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(encoded.as_bytes())
            .map_err(|e| ApiError::bad_request(format!("media {path}: {e}")))?;
        media.push(MediaFile { path, bytes });
    }

    let _guard = state.day_write(date).await;
    if state.store.has_day(date) && !force {
        return Err(StoreError::AlreadyIngested(date).into());
    }
    let artifacts = process_day(DayWindow::new(date, req.tz_offset_minutes), &req.texts, &state.params)?;
    let summary = state.store.write_day(&artifacts, &media, force)?;
    Ok(json_response(StatusCode::CREATED, &summary))
}

async fn day_summary(State(state): State<AppState>, Path(date): Path<String>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_read(date).await;
    Ok(json_response(StatusCode::OK, &state.store.summary(date)?))
}

async fn timeline(State(state): State<AppState>, Path(date): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_read(date).await;
    let text = state.store.timeline_text(date)?;
    Ok(cached_document(&headers, text.into_bytes(), "application/json", "no-cache"))
}

async fn analysis(State(state): State<AppState>, Path(date): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_read(date).await;
    let text = state.store.analysis_text(date)?;
    Ok(cached_document(&headers, text.into_bytes(), "application/json", "no-cache"))
}

#[derive(Debug, Deserialize)]
struct WindowQuery {
    from: Option<String>,
    to: Option<String>,
}

#[derive(Debug, Serialize)]
struct CirclePlace {
    #[serde(flatten)]
    place: WindowPlace,
    circle_radius_px: f64,
}

#[derive(Debug, Serialize)]
struct WindowResponse {
    from: Timestamp,
    to: Timestamp,
    frames: Vec<ImageSample>,
    fixes: Vec<footprint_core::GpsFix>,
    places: Vec<CirclePlace>,
    events: Vec<footprint_core::ContextEvent>,
    sequence: Vec<Frame>,
}

async fn window(State(state): State<AppState>, Path(date): Path<String>, Query(q): Query<WindowQuery>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let ts = |name: &str, raw: Option<String>| -> ApiResult<Timestamp> {
        let raw = raw.ok_or_else(|| ApiError::bad_request(format!("missing `{name}`")))?;
        Timestamp::parse(&raw).map_err(|e| ApiError::bad_request(format!("`{name}`: {e}")))
    };
    let (from, to) = (ts("from", q.from)?, ts("to", q.to)?);

    let _guard = state.day_read(date).await;
    let day = state.store.daylog(date)?;
    let analysis: DayAnalysis = state.store.read_doc(date, "analysis.json")?;
    let invalid = |e: TimelineError| ApiError::new(StatusCode::BAD_REQUEST, "invalid_window", e);
    let sel = WindowSelection::new(&day.window, from, to).map_err(invalid)?;
    let data = select_window(&day, &analysis, sel).map_err(invalid)?;

    let sequence = frame_sequence(&data);
    let max_dwell = data.places.iter().map(|p| p.window_dwell_s).fold(0.0, f64::max);
    let places = data
        .places
        .into_iter()
        .map(|place| {
            let circle_radius_px = circle_radius_px(place.window_dwell_s, max_dwell, CIRCLE_MIN_PX, CIRCLE_MAX_PX)
                .expect("window dwell is positive and bounded by the maximum");
            CirclePlace { place, circle_radius_px }
        })
        .collect();
    let body = WindowResponse { from, to, frames: data.frames, fixes: data.fixes, places, events: data.events, sequence };
    Ok(json_response(StatusCode::OK, &body))
}

async fn media(State(state): State<AppState>, Path((date, media_id)): Path<(String, String)>, headers: HeaderMap) -> ApiResult<Response> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "unknown_media", format!("no media {media_id:?}"));
    let date = parse_date(&date).map_err(|_| not_found())?;
    let _guard = state.day_read(date).await;
    let path = match state.store.media_file(date, &media_id) {
        Ok(Some(path)) => path,
        Ok(None) | Err(StoreError::UnknownDay(_)) => return Err(not_found()),
        Err(e) => return Err(e.into()),
    };
    let bytes = tokio::fs::read(&path).await.map_err(|e| ApiError::from(StoreError::Io(e)))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    Ok(cached_document(&headers, bytes, content_type_for(name), "public, max-age=31536000, immutable"))
}

#[derive(Debug, Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a ReconstructionSession,
    gaps: footprint_core::reconstruction::GapSummary,
}

fn session_view(status: StatusCode, session: &ReconstructionSession) -> Response {
    json_response(status, &SessionView { session, gaps: session.gap_summary() })
}

async fn create_session(State(state): State<AppState>, Path(date): Path<String>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_write(date).await;
    let day = state.store.daylog(date)?;
    let id = state.store.next_session_id(date)?;
    let session = ReconstructionSession::new(id, day.window);
    state.store.save_session(date, &session)?;
    Ok(session_view(StatusCode::CREATED, &session))
}

async fn list_sessions(State(state): State<AppState>, Path(date): Path<String>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_read(date).await;
    Ok(json_response(StatusCode::OK, &state.store.session_ids(date)?))
}

async fn get_session(State(state): State<AppState>, Path((date, id)): Path<(String, String)>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let _guard = state.day_read(date).await;
    let session = state.store.load_session(date, &id)?;
    Ok(session_view(StatusCode::OK, &session))
}

/// Loads a session under its write lock, applies `op`, and persists the
/// result before answering. Nothing is written when `op` fails.
async fn mutate_session<T: Serialize>(
    state: &AppState,
    date: &str,
    id: &str,
    status: StatusCode,
    op: impl FnOnce(&mut ReconstructionSession, Timestamp) -> Result<T, ReconstructionError>,
) -> ApiResult<Response> {
    let date = parse_date(date)?;
    let _day = state.day_read(date).await;
    let lock = state.locks.session(date, id);
    let _session_guard = lock.lock().await;
    let mut session = state.store.load_session(date, id)?;
    let out = op(&mut session, (state.clock)())?;
    state.store.save_session(date, &session)?;
    Ok(json_response(status, &out))
}

async fn append_episode(State(state): State<AppState>, Path((date, id)): Path<(String, String)>, body: Bytes) -> ApiResult<Response> {
    let input: EpisodeInput = parse_json(&body)?;
    mutate_session(&state, &date, &id, StatusCode::CREATED, |s, now| s.append_episode(input, now).cloned()).await
}

async fn amend_last(State(state): State<AppState>, Path((date, id)): Path<(String, String)>, body: Bytes) -> ApiResult<Response> {
    let input: EpisodeInput = parse_json(&body)?;
    mutate_session(&state, &date, &id, StatusCode::OK, |s, now| s.amend_last_episode(input, now).cloned()).await
}

async fn finalize(State(state): State<AppState>, Path((date, id)): Path<(String, String)>) -> ApiResult<Response> {
    mutate_session(&state, &date, &id, StatusCode::OK, |s, _| s.finalize()).await
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(state): State<AppState>, Path((date, id)): Path<(String, String)>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let date = parse_date(&date)?;
    let format: ExportFormat = q.format.as_deref().unwrap_or("csv").parse().map_err(ApiError::bad_request)?;
    let _guard = state.day_read(date).await;
    let session = state.store.load_session(date, &id)?;
    let content_type = match format {
        ExportFormat::Csv => "text/csv; charset=utf-8",
        ExportFormat::Json => "application/json",
    };
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, content_type)], export_episodes(&session, format)).into_response())
}

/// Serves the API on `listener` until `shutdown` completes.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
