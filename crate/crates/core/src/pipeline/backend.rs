use std::future::Future;
use std::io::Cursor;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use base64::Engine;
use image::imageops::{self, FilterType};
use image::{ImageFormat, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use super::{GenerationRequest, JobId};
use crate::pose::{render_skeleton, serialize_pose};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend transport: {0}")]
    Transport(String),
    #[error("backend unreachable after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("backend rejected the job: {0}")]
    Rejected(String),
    #[error("backend response malformed: {0}")]
    Malformed(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// How a backend reports that a job finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionMode {
    /// The result is returned from `submit` itself.
    Inline,
    /// The backend calls the webhook endpoint.
    Webhook,
    /// The pipeline polls `poll` at this interval.
    Polling { interval: Duration },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Completed { image_png: Vec<u8> },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub job_id: JobId,
    /// Present for inline backends.
    pub completion: Option<Completion>,
}

/// Job status document, used both as the webhook body and as the polling
/// response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionPayload {
    pub job_id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CompletionPayload {
    pub fn completed(job_id: &str, image_png: &[u8]) -> Self {
        Self {
            job_id: job_id.into(),
            status: "completed".into(),
            image: Some(base64::engine::general_purpose::STANDARD.encode(image_png)),
            error: None,
        }
    }

    pub fn failed(job_id: &str, reason: &str) -> Self {
        Self { job_id: job_id.into(), status: "failed".into(), image: None, error: Some(reason.into()) }
    }

    /// `Ok(None)` while the job is still pending.
    pub fn into_completion(self) -> Result<Option<Completion>, BackendError> {
        match self.status.as_str() {
            "pending" | "running" => Ok(None),
            "completed" => {
                let b64 = self.image.ok_or_else(|| BackendError::Malformed("completed job without image".into()))?;
                let image_png = base64::engine::general_purpose::STANDARD
                    .decode(b64.trim())
                    .map_err(|e| BackendError::Malformed(format!("image is not base64: {e}")))?;
                Ok(Some(Completion::Completed { image_png }))
            }
            "failed" => Ok(Some(Completion::Failed { reason: self.error.unwrap_or_else(|| "unspecified".into()) })),
            other => Err(BackendError::Malformed(format!("unknown status `{other}`"))),
        }
    }
}

#[async_trait]
pub trait GenerationBackend: Send + Sync {
    fn completion_mode(&self) -> CompletionMode;

    async fn submit(&self, req: &GenerationRequest) -> Result<Submission, BackendError>;

    /// Current status of a job; only called for polling backends.
    async fn poll(&self, job: &JobId) -> Result<Option<Completion>, BackendError> {
        Err(BackendError::Rejected(format!("backend does not support polling job {job}")))
    }
}

/// Bounded exponential backoff for transport failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before retry `k` (0-based); the last value repeats.
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            delays: vec![Duration::from_millis(500), Duration::from_secs(1), Duration::from_secs(2)],
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: usize) -> Duration {
        self.delays.get(retry).or(self.delays.last()).copied().unwrap_or_default()
    }

    pub async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, BackendError>
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, BackendError>>,
    {
        let attempts = self.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                tokio::time::sleep(self.delay_before_retry(attempt as usize - 1)).await;
            }
            match op().await {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() => {
                    log::warn!("generation backend attempt {} of {attempts}: {e}", attempt + 1);
                    last = e.to_string();
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::RetriesExhausted { attempts, last })
    }
}

/// Deterministic stand-in for a diffusion model: the style image resized to
/// the base size, tinted by a hue derived from the seed, with the pose
/// skeleton drawn on top.
pub fn mock_generate(req: &GenerationRequest) -> Result<RgbaImage, BackendError> {
    let style = image::load_from_memory(&req.style.image)
        .map_err(|e| BackendError::Rejected(format!("style image undecodable: {e}")))?
        .to_rgba8();
    let (w, h) = (req.params.base_size.width, req.params.base_size.height);
    let mut out = imageops::resize(&style, w, h, FilterType::Triangle);

    let tint = hue_to_rgb((req.params.seed % 360) as f64);
    for p in out.pixels_mut() {
        for c in 0..3 {
            p[c] = ((3 * u16::from(p[c]) + u16::from(tint[c]) + 2) / 4) as u8;
        }
        p[3] = 255;
    }
    if !req.pose_free {
        let overlay = render_skeleton(&req.pose, w, h).map_err(|e| BackendError::Rejected(e.to_string()))?;
        for (dst, src) in out.pixels_mut().zip(overlay.pixels()) {
            if src[3] > 0 {
                *dst = Rgba([src[0], src[1], src[2], 255]);
            }
        }
    }
    Ok(out)
}

/// Fully saturated color for a hue in degrees.
fn hue_to_rgb(hue: f64) -> [u8; 3] {
    let h = (hue.rem_euclid(360.0)) / 60.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
}

pub(crate) fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png).expect("PNG encoding into memory");
    out
}

/// In-process backend that completes every job immediately.
#[derive(Debug, Default)]
pub struct MockBackend {
    next_id: AtomicU64,
    transport_failures: AtomicU32,
    reject: Option<String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails the next `n` submissions with a transport error.
    pub fn with_transport_failures(n: u32) -> Self {
        Self { transport_failures: AtomicU32::new(n), ..Self::default() }
    }

    /// Rejects every submission.
    pub fn rejecting(reason: impl Into<String>) -> Self {
        Self { reject: Some(reason.into()), ..Self::default() }
    }
}

#[async_trait]
impl GenerationBackend for MockBackend {
    fn completion_mode(&self) -> CompletionMode {
        CompletionMode::Inline
    }

    async fn submit(&self, req: &GenerationRequest) -> Result<Submission, BackendError> {
        if self
            .transport_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err(BackendError::Transport("mock connection refused".into()));
        }
        if let Some(reason) = &self.reject {
            return Err(BackendError::Rejected(reason.clone()));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst) + 1;
        let image_png = encode_png(&mock_generate(req)?);
        Ok(Submission { job_id: JobId(format!("mock-{id:06}")), completion: Some(Completion::Completed { image_png }) })
    }
}

/// Field layout of a job submission; see `docs/backend-protocol.md`.
#[derive(Debug, Serialize)]
struct WireJob<'a> {
    prompt: &'a str,
    negative_prompt: &'a str,
    steps: u32,
    cfg: f64,
    seed: u64,
    width: u32,
    height: u32,
    pose: serde_json::Value,
    pose_free: bool,
    style_artwork_id: &'a str,
    style_image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    callback_url: Option<&'a str>,
}

#[derive(Debug, Deserialize)]
struct WireAccepted {
    job_id: String,
}

/// Client for an external inference server speaking the JSON job protocol.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    base_url: String,
    callback_url: Option<String>,
    mode: CompletionMode,
}

impl HttpBackend {
    /// `callback_url` set selects webhook completion; otherwise the job
    /// resource is polled every `poll_interval`.
    pub fn new(
        base_url: impl Into<String>,
        callback_url: Option<String>,
        poll_interval: Duration,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client =
            reqwest::Client::builder().timeout(timeout).build().map_err(|e| BackendError::Transport(e.to_string()))?;
        let mode = match callback_url {
            Some(_) => CompletionMode::Webhook,
            None => CompletionMode::Polling { interval: poll_interval },
        };
        Ok(Self { client, base_url: base_url.into().trim_end_matches('/').to_string(), callback_url, mode })
    }

    fn classify(status: reqwest::StatusCode, body: &str) -> Result<(), BackendError> {
        if status.is_success() {
            Ok(())
        } else if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            Err(BackendError::Transport(format!("backend answered {status}")))
        } else {
            Err(BackendError::Rejected(format!("{status}: {body}")))
        }
    }
}

#[async_trait]
impl GenerationBackend for HttpBackend {
    fn completion_mode(&self) -> CompletionMode {
        self.mode
    }

    async fn submit(&self, req: &GenerationRequest) -> Result<Submission, BackendError> {
        let pose: serde_json::Value =
            serde_json::from_str(&serialize_pose(&req.pose)).expect("pose documents are valid JSON");
        let body = WireJob {
            prompt: &req.prompt,
            negative_prompt: &req.params.negative_prompt,
            steps: req.params.steps,
            cfg: req.params.cfg,
            seed: req.params.seed,
            width: req.params.base_size.width,
            height: req.params.base_size.height,
            pose,
            pose_free: req.pose_free,
            style_artwork_id: &req.style.artwork_id,
            style_image: base64::engine::general_purpose::STANDARD.encode(&req.style.image),
            callback_url: self.callback_url.as_deref(),
        };
        let response = self
            .client
            .post(format!("{}/jobs", self.base_url))
            .json(&body)
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().await.map_err(|e| BackendError::Transport(e.to_string()))?;
        Self::classify(status, &text)?;
        let accepted: WireAccepted =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("submit response: {e}")))?;
        Ok(Submission { job_id: JobId(accepted.job_id), completion: None })
    }

    async fn poll(&self, job: &JobId) -> Result<Option<Completion>, BackendError> {
        let response = self
            .client
            .get(format!("{}/jobs/{}", self.base_url, job.0))
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().await.map_err(|e| BackendError::Transport(e.to_string()))?;
        Self::classify(status, &text)?;
        let payload: CompletionPayload =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("status response: {e}")))?;
        payload.into_completion()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hue_wheel_primaries() {
        assert_eq!(hue_to_rgb(0.0), [255, 0, 0]);
        assert_eq!(hue_to_rgb(120.0), [0, 255, 0]);
        assert_eq!(hue_to_rgb(240.0), [0, 0, 255]);
        assert_eq!(hue_to_rgb(60.0), [255, 255, 0]);
        assert_eq!(hue_to_rgb(360.0), [255, 0, 0]);
    }

    #[test]
    fn retry_delays_follow_policy() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before_retry(0), Duration::from_millis(500));
        assert_eq!(p.delay_before_retry(1), Duration::from_secs(1));
        assert_eq!(p.delay_before_retry(2), Duration::from_secs(2));
        assert_eq!(p.delay_before_retry(9), Duration::from_secs(2));
    }

    #[tokio::test(start_paused = true)]
    async fn transport_errors_retry_three_times_then_give_up() {
        let calls = AtomicU32::new(0);
        let started = tokio::time::Instant::now();
        let r: Result<(), _> = RetryPolicy::default()
            .run(|| {
                calls.fetch_add(1, Ordering::SeqCst);
                async { Err(BackendError::Transport("down".into())) }
            })
            .await;
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert!(matches!(r, Err(BackendError::RetriesExhausted { attempts: 3, .. })));
        assert_eq!(started.elapsed(), Duration::from_millis(1500));
    }

    #[tokio::test(start_paused = true)]
    async fn rejection_is_not_retried() {
        let calls = AtomicU32::new(0);
        let r: Result<(), _> = RetryPolicy::default()
            .run(|| {
                calls.fetch_add(1, Ordering::SeqCst);
                async { Err(BackendError::Rejected("bad prompt".into())) }
            })
            .await;
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(matches!(r, Err(BackendError::Rejected(_))));
    }

    #[test]
    fn payload_decoding() {
        let done = CompletionPayload::completed("j", b"png").into_completion().unwrap();
        assert_eq!(done, Some(Completion::Completed { image_png: b"png".to_vec() }));
        let failed = CompletionPayload::failed("j", "oom").into_completion().unwrap();
        assert_eq!(failed, Some(Completion::Failed { reason: "oom".into() }));
        let pending = CompletionPayload { job_id: "j".into(), status: "pending".into(), image: None, error: None };
        assert_eq!(pending.into_completion().unwrap(), None);
        let bad = CompletionPayload { job_id: "j".into(), status: "completed".into(), image: None, error: None };
        assert!(bad.into_completion().is_err());
    }
}
