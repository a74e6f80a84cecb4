use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_pose, FrameSize, Keypoint, Person, PoseError, PoseSkeleton, KEYPOINT_COUNT};

/// Per-request data handed to an extractor alongside the capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractContext {
    /// Drives [`StubExtractor`]; ignored by real detectors.
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("capture is empty")]
    EmptyCapture,
    #[error("no pose found in capture")]
    NoPoseFound,
    #[error("pose extractor unreachable: {0}")]
    Transport(String),
    #[error("pose extractor returned an invalid document: {0}")]
    InvalidResponse(#[from] PoseError),
}

impl ExtractError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ExtractError::Transport(_))
    }
}

#[async_trait]
pub trait PoseExtractor: Send + Sync {
    async fn extract(&self, capture: &[u8], ctx: &ExtractContext) -> Result<PoseSkeleton, ExtractError>;
}

/// Runs `extractor` on a capture, turning an empty detection into
/// [`ExtractError::NoPoseFound`].
pub async fn extract_pose(
    capture: &[u8],
    extractor: &dyn PoseExtractor,
    ctx: &ExtractContext,
) -> Result<PoseSkeleton, ExtractError> {
    if capture.is_empty() {
        return Err(ExtractError::EmptyCapture);
    }
    let skel = extractor.extract(capture, ctx).await?;
    if skel.is_empty() {
        return Err(ExtractError::NoPoseFound);
    }
    Ok(skel)
}

const CANONICAL: [(f64, f64); KEYPOINT_COUNT] = [
    (0.50, 0.20), // nose
    (0.50, 0.28), // neck
    (0.42, 0.29), // right shoulder
    (0.40, 0.42), // right elbow
    (0.39, 0.54), // right wrist
    (0.58, 0.29), // left shoulder
    (0.60, 0.42), // left elbow
    (0.61, 0.54), // left wrist
    (0.45, 0.56), // right hip
    (0.45, 0.72), // right knee
    (0.45, 0.88), // right ankle
    (0.55, 0.56), // left hip
    (0.55, 0.72), // left knee
    (0.55, 0.88), // left ankle
    (0.48, 0.18), // right eye
    (0.52, 0.18), // left eye
    (0.46, 0.19), // right ear
    (0.54, 0.19), // left ear
];

const CANONICAL_CONFIDENCE: f64 = 0.9;
const STUB_JITTER: f64 = 0.02;

/// One person standing relaxed, arms down, centered in a 640x480 frame.
pub fn canonical_standing() -> PoseSkeleton {
    canonical_in(FrameSize::new(640, 480))
}

fn canonical_in(size: FrameSize) -> PoseSkeleton {
    let mut kps = [Keypoint::MISSING; KEYPOINT_COUNT];
    for (kp, (x, y)) in kps.iter_mut().zip(CANONICAL) {
        *kp = Keypoint::new(x, y, CANONICAL_CONFIDENCE);
    }
    let person = Person::new(kps).expect("canonical skeleton is valid");
    PoseSkeleton::new(vec![person], size).expect("non-zero frame")
}

/// Deterministic extractor for tests and offline demos.
///
/// Seed 0 yields [`canonical_standing`]; any other seed jitters every joint
/// by up to ±0.02 with a ChaCha stream keyed by the seed. The capture bytes
/// are only probed for their dimensions.
#[derive(Debug, Clone)]
pub struct StubExtractor {
    default_frame: FrameSize,
    no_person: bool,
}

impl Default for StubExtractor {
    fn default() -> Self {
        Self { default_frame: FrameSize::new(640, 480), no_person: false }
    }
}

impl StubExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    /// An extractor that never finds anyone.
    pub fn finding_nobody() -> Self {
        Self { no_person: true, ..Self::default() }
    }

    pub fn skeleton_for(&self, seed: u64, frame: FrameSize) -> PoseSkeleton {
        if self.no_person {
            return PoseSkeleton::empty(frame);
        }
        let base = canonical_in(frame);
        if seed == 0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        base.persons()[0]
            .map_points(|k| {
                let dx = rng.random_range(-STUB_JITTER..=STUB_JITTER);
                let dy = rng.random_range(-STUB_JITTER..=STUB_JITTER);
                Keypoint::new((k.x + dx).clamp(0.0, 1.0), (k.y + dy).clamp(0.0, 1.0), k.confidence)
            })
            .and_then(|p| PoseSkeleton::new(vec![p], frame))
            .expect("jittered canonical skeleton stays valid")
    }
}

fn probe_dimensions(capture: &[u8]) -> Option<FrameSize> {
    let reader = image::ImageReader::new(std::io::Cursor::new(capture)).with_guessed_format().ok()?;
    let (w, h) = reader.into_dimensions().ok()?;
    (w > 0 && h > 0).then_some(FrameSize::new(w, h))
}

#[async_trait]
impl PoseExtractor for StubExtractor {
    async fn extract(&self, capture: &[u8], ctx: &ExtractContext) -> Result<PoseSkeleton, ExtractError> {
        let frame = probe_dimensions(capture).unwrap_or(self.default_frame);
        Ok(self.skeleton_for(ctx.seed, frame))
    }
}

/// Client for an external detector that accepts the raw capture as the
/// request body and answers with a pose document.
#[derive(Debug, Clone)]
pub struct HttpPoseExtractor {
    client: reqwest::Client,
    url: String,
}

impl HttpPoseExtractor {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ExtractError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ExtractError::Transport(e.to_string()))?;
        Ok(Self { client, url: url.into() })
    }
}

#[async_trait]
impl PoseExtractor for HttpPoseExtractor {
    async fn extract(&self, capture: &[u8], _ctx: &ExtractContext) -> Result<PoseSkeleton, ExtractError> {
        let response = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
            .body(capture.to_vec())
            .send()
            .await
            .map_err(|e| ExtractError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ExtractError::Transport(format!("detector answered {status}")));
        }
        let body = response.text().await.map_err(|e| ExtractError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ExtractError::Transport(format!("detector answered {status}: {body}")));
        }
        Ok(parse_pose(&body)?)
    }
}
