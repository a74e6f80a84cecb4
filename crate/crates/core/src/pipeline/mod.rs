//! Generation pipeline: request composition, backend dispatch,
//! post-processing and idempotent finalization.

mod backend;
mod job;
mod orchestrator;
mod postprocess;
mod signature;

pub use backend::{
    mock_generate, BackendError, Completion, CompletionMode, CompletionPayload, GenerationBackend, HttpBackend,
    MockBackend, RetryPolicy, Submission,
};
pub use job::{JobEvent, JobState, JobTransitionError};
pub use orchestrator::{Finalized, JobMeta, Pipeline, PipelineError, Submitted};
pub use signature::{sign_payload, verify_signature, SIGNATURE_HEADER};
pub use postprocess::{
    default_chain, postprocess, IdentityFaceEnhance, PostOutcome, PostProcessor, StageError, Upscale2x,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{ArtworkEntry, StyleRef};
use crate::clock::Timestamp;
use crate::pose::{FrameSize, PoseSkeleton};
use crate::session::PickupCode;
use crate::Booth;

/// Shipped default; deployments override it in configuration.
pub const DEFAULT_NEGATIVE_PROMPT: &str =
    "lowres, blurry, jpeg artifacts, watermark, text, signature, deformed hands, extra limbs, nsfw, nudity, gore";

/// Upper bound on either side of the base size, to keep mock and upscaled
/// rasters within memory.
pub const MAX_BASE_SIDE: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub steps: u32,
    pub cfg: f64,
    pub seed: u64,
    pub base_size: FrameSize,
    pub negative_prompt: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            steps: 50,
            cfg: 8.0,
            seed: 0,
            base_size: FrameSize { width: 512, height: 512 },
            negative_prompt: DEFAULT_NEGATIVE_PROMPT.to_string(),
        }
    }
}

impl GenerationParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let arg = |m: String| Err(ComposeError::Argument(m));
        if self.steps == 0 {
            return arg("steps must be positive".into());
        }
        if !(self.cfg.is_finite() && self.cfg > 0.0) {
            return arg(format!("cfg must be a positive number, got {}", self.cfg));
        }
        let FrameSize { width, height } = self.base_size;
        if width == 0 || height == 0 || width > MAX_BASE_SIDE || height > MAX_BASE_SIDE {
            return arg(format!("base_size {width}x{height} outside 1..={MAX_BASE_SIDE}"));
        }
        Ok(())
    }
}

/// Camera upload held only for the hand-off to the pipeline. It is skipped
/// by every serializer and redacted in debug output.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct TransientCapture(Vec<u8>);

impl TransientCapture {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for TransientCapture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TransientCapture(<{} bytes redacted>)", self.0.len())
    }
}

/// Style conditioning input: the artwork image as stored in the catalog.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleDescriptor {
    pub artwork_id: String,
    #[serde(with = "b64")]
    pub image: Vec<u8>,
}

impl fmt::Debug for StyleDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StyleDescriptor")
            .field("artwork_id", &self.artwork_id)
            .field("image", &format_args!("<{} bytes>", self.image.len()))
            .finish()
    }
}

mod b64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// Who a request is generated for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionContext {
    pub session_id: String,
    pub station_id: String,
    pub booth: Booth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub pose: PoseSkeleton,
    /// Set when no person was found after the allowed retries; the
    /// generator then works from style and prompt alone.
    pub pose_free: bool,
    #[serde(skip)]
    pub capture: TransientCapture,
    pub style: StyleDescriptor,
    pub prompt: String,
    pub params: GenerationParams,
    pub session: SessionContext,
}

impl GenerationRequest {
    /// Same request with the session identity blanked, for purity checks.
    pub fn without_session(&self) -> Self {
        let mut r = self.clone();
        r.session.session_id.clear();
        r
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Assembles the four generator inputs: pose, style image, caption prompt
/// and the deployment negative prompt carried in `params`.
pub fn compose_request(
    entry: &ArtworkEntry,
    style: StyleRef,
    pose: PoseSkeleton,
    pose_free: bool,
    capture: TransientCapture,
    params: GenerationParams,
    session: SessionContext,
) -> Result<GenerationRequest, ComposeError> {
    if !entry.safety_approved {
        return Err(ComposeError::Configuration(format!("artwork `{}` is not approved for serving", entry.id)));
    }
    if entry.caption_prompt.trim().is_empty() {
        return Err(ComposeError::Configuration(format!("artwork `{}` has an empty caption", entry.id)));
    }
    if style.artwork_id != entry.id {
        return Err(ComposeError::Argument(format!(
            "style reference `{}` does not belong to `{}`",
            style.artwork_id, entry.id
        )));
    }
    params.validate()?;
    if pose.is_empty() && !pose_free {
        return Err(ComposeError::Argument("pose has no person and the request is not pose-free".into()));
    }
    Ok(GenerationRequest {
        pose,
        pose_free,
        capture,
        style: StyleDescriptor { artwork_id: style.artwork_id, image: style.image },
        prompt: entry.caption_prompt.clone(),
        params,
        session,
    })
}

/// A finished generation as handed to the store and returned to callers.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedResult {
    pub result_id: String,
    pub image_png: Vec<u8>,
    pub pose: PoseSkeleton,
    pub artwork_id: String,
    pub booth: Booth,
    pub code: PickupCode,
    pub created_at: Timestamp,
}

/// Opaque identifier assigned by the backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub String);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Collection;
    use crate::pose::{canonical_standing, DynamismRating};

    fn entry() -> ArtworkEntry {
        ArtworkEntry {
            id: "a1".into(),
            title: "Shore".into(),
            artist: "Unknown".into(),
            collection: Collection::Wikiart,
            image_path: "a1.png".into(),
            caption_prompt: "a painting of a shore at dusk".into(),
            subject_count: 1,
            dynamism: DynamismRating::Low,
            safety_approved: true,
        }
    }

    fn style() -> StyleRef {
        StyleRef { artwork_id: "a1".into(), image: vec![1, 2, 3], caption: "a painting of a shore at dusk".into() }
    }

    fn session(id: &str) -> SessionContext {
        SessionContext { session_id: id.into(), station_id: "s1".into(), booth: Booth::Public }
    }

    fn compose(params: GenerationParams) -> Result<GenerationRequest, ComposeError> {
        compose_request(
            &entry(),
            style(),
            canonical_standing(),
            false,
            TransientCapture::new(b"CAPTURE-SENTINEL".to_vec()),
            params,
            session("x"),
        )
    }

    #[test]
    fn defaults_are_fifty_steps_cfg_eight() {
        let r = compose(GenerationParams::default()).unwrap();
        assert_eq!(r.params.steps, 50);
        assert_eq!(r.params.cfg, 8.0);
        assert_eq!(r.params.base_size, FrameSize { width: 512, height: 512 });
        assert_eq!(r.prompt, entry().caption_prompt);
        assert_eq!(r.params.negative_prompt, DEFAULT_NEGATIVE_PROMPT);
    }

    #[test]
    fn serialized_request_has_no_capture() {
        let r = compose(GenerationParams::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("shore at dusk"));
        assert!(json.contains("persons"));
        assert!(!json.contains("CAPTURE-SENTINEL"));
        assert!(!format!("{r:?}").contains("CAPTURE-SENTINEL"));
    }

    #[test]
    fn compose_is_pure_up_to_session_id() {
        let a = compose(GenerationParams::with_seed(4)).unwrap();
        let mut b = compose(GenerationParams::with_seed(4)).unwrap();
        b.session.session_id = "other".into();
        assert_eq!(a.without_session(), b.without_session());
    }

    #[test]
    fn empty_caption_is_configuration_error() {
        let mut e = entry();
        e.caption_prompt = "  ".into();
        let err = compose_request(
            &e,
            style(),
            canonical_standing(),
            false,
            TransientCapture::default(),
            GenerationParams::default(),
            session("x"),
        )
        .unwrap_err();
        assert!(matches!(err, ComposeError::Configuration(_)));
    }

    #[test]
    fn invalid_params_are_argument_errors() {
        for p in [
            GenerationParams { steps: 0, ..Default::default() },
            GenerationParams { cfg: 0.0, ..Default::default() },
            GenerationParams { cfg: f64::NAN, ..Default::default() },
            GenerationParams { base_size: FrameSize { width: 0, height: 512 }, ..Default::default() },
        ] {
            assert!(matches!(compose(p), Err(ComposeError::Argument(_))));
        }
    }

    #[test]
    fn empty_pose_needs_pose_free_flag() {
        let empty = PoseSkeleton::empty(FrameSize { width: 640, height: 480 });
        let make = |free| {
            compose_request(
                &entry(),
                style(),
                empty.clone(),
                free,
                TransientCapture::default(),
                GenerationParams::default(),
                session("x"),
            )
        };
        assert!(matches!(make(false), Err(ComposeError::Argument(_))));
        assert!(make(true).unwrap().pose_free);
    }
}
