use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bodyprompt_core::catalog::{ArtworkEntry, Collection};
use bodyprompt_core::pipeline::{
    compose_request, verify_signature, CompletionPayload, JobId, JobState, PipelineError, SessionContext,
    TransientCapture, SIGNATURE_HEADER,
};
use bodyprompt_core::pose::{extract_pose, DynamismRating, ExtractContext, ExtractError, PoseSkeleton};
use bodyprompt_core::session::{derive_seed, CodeError, Event, KioskView, Phase, MAX_POSE_RETRIES};
use bodyprompt_core::store::{FeedCursor, FeedEntry, FeedPage};
use bodyprompt_core::Booth;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::app::AppState;
use crate::config::MAX_LONG_POLL_SECS;
use crate::error::ApiError;

type AppResult<T> = Result<T, ApiError>;

/// API routes plus the kiosk and viewer assets on one listener.
pub fn router(state: Arc<AppState>) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    let static_dir = state.config.static_dir.clone();
    Router::new()
        .route("/healthz", get(healthz))
        .route("/station/{id}/consent", post(consent))
        .route("/station/{id}/catalog", get(catalog))
        .route("/station/{id}/select", post(select))
        .route("/station/{id}/capture", post(capture).layer(DefaultBodyLimit::max(upload_limit)))
        .route("/station/{id}/status", get(status))
        .route("/feed", get(feed))
        .route("/webhook/generation", post(webhook))
        .route("/results/{id}/image.png", get(result_image))
        .route("/results/{id}/pose.json", get(result_pose))
        .route("/artworks/{id}/image", get(artwork_image))
        .route("/pickup/{code}", get(pickup))
        .fallback_service(ServeDir::new(static_dir))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    feed_entries: usize,
    catalog_servable: usize,
    codes_issued: usize,
    log_dropped: u64,
}

async fn healthz(State(s): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        feed_entries: s.store.len(),
        catalog_servable: s.catalog.servable().count(),
        codes_issued: s.codes.issued_count(),
        log_dropped: s.log.dropped(),
    })
}

/// Kiosk state plus what the current screen needs beyond the session.
#[derive(Debug, Serialize)]
pub struct StationStatus {
    #[serde(flatten)]
    pub view: KioskView,
    pub session_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub job: Option<JobStatus>,
}

#[derive(Debug, Serialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: &'static str,
    /// Only when the deployment shows results on the kiosk.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
}

fn status_of(s: &AppState, st: &crate::app::Station) -> StationStatus {
    let job = st.state.job_id().map(|id| {
        let state = s.pipeline.job_state(&JobId(id.to_string()));
        let image_url = match &state {
            Some(JobState::Completed { result_id }) if s.config.inline_results => Some(image_url(result_id)),
            _ => None,
        };
        JobStatus {
            job_id: id.to_string(),
            state: match state {
                Some(JobState::Pending) | None => "pending",
                Some(JobState::Completed { .. }) => "completed",
                Some(JobState::Failed { .. }) => "failed",
            },
            image_url,
        }
    });
    StationStatus { view: st.state.snapshot(&s.catalog, s.now()), session_id: st.session_id(), job }
}

async fn consent(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<StationStatus>> {
    let station = s.station(&id)?;
    let mut st = station.lock().await;
    let now = s.now();
    s.tick(&mut st, now);
    if st.state.phase() == Phase::Consent {
        st.session_no += 1;
    }
    s.apply(&mut st, Event::ConsentGiven)?;
    Ok(Json(status_of(&s, &st)))
}

async fn status(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<StationStatus>> {
    let station = s.station(&id)?;
    let mut st = station.lock().await;
    let now = s.now();
    s.tick(&mut st, now);
    Ok(Json(status_of(&s, &st)))
}

#[derive(Debug, Serialize)]
pub struct ArtworkCard {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub collection: Collection,
    pub dynamism: DynamismRating,
    pub image_url: String,
}

impl From<&ArtworkEntry> for ArtworkCard {
    fn from(e: &ArtworkEntry) -> Self {
        Self {
            id: e.id.clone(),
            title: e.title.clone(),
            artist: e.artist.clone(),
            collection: e.collection,
            dynamism: e.dynamism,
            image_url: format!("/artworks/{}/image", e.id),
        }
    }
}

/// Servable artworks in this station's current gallery order.
async fn catalog(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<Vec<ArtworkCard>>> {
    let station = s.station(&id)?;
    let seed = station.lock().await.state.gallery_seed();
    let cards = s
        .catalog
        .shuffled_view(seed)
        .iter()
        .filter_map(|aid| s.catalog.servable_entry(aid))
        .map(ArtworkCard::from)
        .collect();
    Ok(Json(cards))
}

#[derive(Debug, Deserialize)]
pub struct SelectBody {
    pub artwork_id: String,
}

/// Chooses an artwork and starts the countdown.
async fn select(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<SelectBody>,
) -> AppResult<Json<StationStatus>> {
    let station = s.station(&id)?;
    let mut st = station.lock().await;
    if s.catalog.servable_entry(&body.artwork_id).is_none() {
        return Err(ApiError::NotFound(format!("unknown artwork `{}`", body.artwork_id)));
    }
    let before = st.state.clone();
    s.apply(&mut st, Event::ArtworkSelected(body.artwork_id))?;
    if let Err(e) = s.apply(&mut st, Event::StartCountdown) {
        st.state = before;
        return Err(e);
    }
    Ok(Json(status_of(&s, &st)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaptureResponse {
    pub code: String,
    pub job_id: String,
    pub pose_free: bool,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_id: Option<String>,
}

/// Takes the camera frame, extracts the pose and submits the generation.
/// The upload lives only inside this handler.
async fn capture(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<Json<CaptureResponse>> {
    let station = s.station(&id)?;
    let mut st = station.lock().await;
    let now = s.now();
    s.tick(&mut st, now);
    let phase = st.state.phase();
    if phase != Phase::Capturing {
        return Err(ApiError::Conflict { phase, message: format!("capture not allowed in phase {phase}") });
    }

    let seed_label = format!("pose/{id}");
    let ctx = ExtractContext {
        seed: derive_seed(s.config.deployment_seed, &seed_label, st.session_no * 8 + u64::from(st.state.pose_retries())),
    };
    let (pose, pose_free) = match extract_pose(&body, s.extractor.as_ref(), &ctx).await {
        Ok(skel) => (skel, false),
        Err(ExtractError::NoPoseFound) if !st.state.pose_retries_exhausted() => {
            s.apply(&mut st, Event::PoseNotFound)?;
            return Err(ApiError::NoPoseFound { retries_left: MAX_POSE_RETRIES - st.state.pose_retries() });
        }
        Err(ExtractError::NoPoseFound) => (PoseSkeleton::empty(s.params.base_size), true),
        Err(ExtractError::EmptyCapture) => return Err(ApiError::BadRequest("capture is empty".into())),
        Err(e) => return Err(ApiError::BadGateway(e.to_string())),
    };

    let artwork_id = st.state.selected_artwork().expect("artwork selected before capture").to_string();
    let entry = s
        .catalog
        .servable_entry(&artwork_id)
        .ok_or_else(|| ApiError::Internal(format!("selected artwork `{artwork_id}` vanished")))?;
    let style = s.catalog.style_ref(entry).map_err(|e| ApiError::Internal(e.to_string()))?;
    let mut params = s.params.clone();
    params.seed = derive_seed(s.config.deployment_seed, &format!("generate/{id}"), st.session_no);
    let session = SessionContext { session_id: st.session_id(), station_id: id.clone(), booth: st.spec.booth };
    let request = compose_request(entry, style, pose, pose_free, TransientCapture::new(body.to_vec()), params, session)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    drop(body);

    let code = s.codes.issue(now).map_err(|e| match e {
        CodeError::Exhausted { .. } => ApiError::Unavailable(e.to_string()),
        other => ApiError::Internal(other.to_string()),
    })?;
    s.apply(&mut st, Event::CaptureTaken(code.clone()))?;

    let submitted = match s.pipeline.submit(request, code.clone()).await {
        Ok(sub) => sub,
        Err(e) => {
            let reason = submission_failure(&e);
            s.apply(&mut st, Event::SubmissionFailed(reason.clone()))?;
            return Err(ApiError::BadGateway(reason));
        }
    };
    s.apply(&mut st, Event::SubmissionAcked(submitted.job_id.0.clone()))?;
    if let Some(f) = &submitted.finalized {
        if let JobState::Failed { reason } = &f.state {
            s.apply(&mut st, Event::SubmissionFailed(format!("generation failed: {reason}")))?;
            return Err(ApiError::BadGateway(format!("generation failed: {reason}")));
        }
    }
    Ok(Json(CaptureResponse {
        code: code.text(),
        job_id: submitted.job_id.0,
        pose_free,
        phase: st.state.phase(),
        result_id: submitted.finalized.and_then(|f| f.result).map(|r| r.result_id),
    }))
}

fn submission_failure(e: &PipelineError) -> String {
    match e {
        PipelineError::Backend(b) => format!("generation service unavailable: {b}"),
        other => other.to_string(),
    }
}

#[derive(Debug, Deserialize)]
pub struct FeedQuery {
    pub cursor: Option<String>,
    pub booth: Option<String>,
    /// Seconds to park when nothing is new; 0 answers immediately.
    pub timeout: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedItem {
    pub result_id: String,
    pub created_at: u64,
    pub booth: Booth,
    pub artwork_id: String,
    pub image_url: String,
    pub pose_url: String,
}

impl From<FeedEntry> for FeedItem {
    fn from(e: FeedEntry) -> Self {
        Self {
            image_url: image_url(&e.result_id),
            pose_url: format!("/results/{}/pose.json", e.result_id),
            result_id: e.result_id,
            created_at: e.created_at.as_millis(),
            booth: e.booth,
            artwork_id: e.artwork_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedResponse {
    pub entries: Vec<FeedItem>,
    pub new_count: usize,
    pub next_cursor: usize,
    pub resync: bool,
}

impl From<FeedPage> for FeedResponse {
    fn from(p: FeedPage) -> Self {
        Self {
            new_count: p.new_count,
            next_cursor: p.next_cursor,
            resync: p.resync,
            entries: p.entries.into_iter().map(FeedItem::from).collect(),
        }
    }
}

fn image_url(result_id: &str) -> String {
    format!("/results/{result_id}/image.png")
}

/// Long poll: answers at once when something is newer than the cursor,
/// otherwise parks until an append or the timeout.
async fn feed(State(s): State<Arc<AppState>>, Query(q): Query<FeedQuery>) -> AppResult<Json<FeedResponse>> {
    let timeout = q.timeout.unwrap_or(s.config.long_poll_timeout);
    if timeout > MAX_LONG_POLL_SECS {
        return Err(ApiError::BadRequest(format!("timeout must be at most {MAX_LONG_POLL_SECS}s")));
    }
    let booth = match q.booth.as_deref() {
        None | Some("") | Some("all") => None,
        Some(b) => Some(b.parse::<Booth>().map_err(ApiError::BadRequest)?),
    };
    let cursor: FeedCursor = q.cursor.as_deref().unwrap_or("").parse().expect("cursor parsing is infallible");

    // Subscribe before reading so an append in between is not missed.
    let mut appended = s.store.subscribe();
    let page = s.store.feed_since(&cursor, booth);
    if page.new_count > 0 || page.resync || timeout == 0 {
        return Ok(Json(page.into()));
    }
    let deadline = tokio::time::Instant::now() + Duration::from_secs(timeout);
    loop {
        match tokio::time::timeout_at(deadline, appended.changed()).await {
            Ok(Ok(())) => {
                let page = s.store.feed_since(&cursor, booth);
                if page.new_count > 0 {
                    return Ok(Json(page.into()));
                }
            }
            Ok(Err(_)) | Err(_) => return Ok(Json(s.store.feed_since(&cursor, booth).into())),
        }
    }
}

#[derive(Debug, Serialize)]
struct WebhookAck {
    job_id: String,
    state: JobState,
    duplicate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    result_id: Option<String>,
}

/// Completion callback from the generation backend. Unsigned or tampered
/// bodies never reach the pipeline.
async fn webhook(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> AppResult<Response> {
    let signature = headers.get(SIGNATURE_HEADER).and_then(|v| v.to_str().ok()).unwrap_or("");
    if !verify_signature(s.config.webhook_secret.as_bytes(), &body, signature) {
        s.log.append_clamped(bodyprompt_core::store::LogRecord::diagnostic(
            s.now(),
            "webhook",
            "rejected webhook with bad signature",
        ));
        return Err(ApiError::Unauthorized);
    }
    let payload: CompletionPayload =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("malformed payload: {e}")))?;
    let job = JobId(payload.job_id.clone());
    let Some(completion) = payload.into_completion().map_err(|e| ApiError::BadRequest(e.to_string()))? else {
        return Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "job_id": job.0, "state": "pending" }))).into_response());
    };
    let finalized = s.pipeline.finalize(&job, completion).await.map_err(|e| match e {
        PipelineError::UnknownJob(j) => ApiError::NotFound(format!("unknown job {j}")),
        other => ApiError::Internal(other.to_string()),
    })?;
    if let (JobState::Failed { reason }, false) = (&finalized.state, finalized.duplicate) {
        s.fail_session_for_job(&job, &format!("generation failed: {reason}")).await;
    }
    Ok(Json(WebhookAck {
        job_id: job.0,
        duplicate: finalized.duplicate,
        result_id: finalized.result.map(|r| r.result_id),
        state: finalized.state,
    })
    .into_response())
}

async fn result_image(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let bytes = s.store.read_image(&id).map_err(|_| ApiError::NotFound(format!("unknown result `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn result_pose(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let doc = s.store.read_pose(&id).map_err(|_| ApiError::NotFound(format!("unknown result `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

async fn artwork_image(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let entry = s.catalog.servable_entry(&id).ok_or_else(|| ApiError::NotFound(format!("unknown artwork `{id}`")))?;
    let path = s.catalog.image_path(entry);
    let bytes = tokio::fs::read(&path).await.map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

#[derive(Debug, Serialize)]
struct Pickup {
    result_id: String,
    image_url: String,
}

/// Souvenir download: a pickup code redeems its finished image.
async fn pickup(State(s): State<Arc<AppState>>, Path(code): Path<String>) -> AppResult<Json<Pickup>> {
    let entry = s.store.find_by_code(code.trim()).ok_or_else(|| ApiError::NotFound("no result for this code yet".into()))?;
    Ok(Json(Pickup { image_url: image_url(&entry.result_id), result_id: entry.result_id }))
}
