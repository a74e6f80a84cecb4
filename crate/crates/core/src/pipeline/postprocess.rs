use image::imageops::{self, FilterType};
use image::RgbaImage;

/// One stage of the post-generation chain.
pub trait PostProcessor: Send + Sync {
    fn name(&self) -> &str;
    fn process(&self, image: RgbaImage) -> Result<RgbaImage, StageError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("stage {stage} failed: {reason}")]
pub struct StageError {
    pub stage: String,
    pub reason: String,
}

/// Doubles both sides by pixel replication.
#[derive(Debug, Clone, Copy, Default)]
pub struct Upscale2x;

impl PostProcessor for Upscale2x {
    fn name(&self) -> &str {
        "upscale_x2"
    }

    fn process(&self, image: RgbaImage) -> Result<RgbaImage, StageError> {
        let (w, h) = image.dimensions();
        let (w2, h2) = match (w.checked_mul(2), h.checked_mul(2)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(StageError { stage: self.name().into(), reason: "image too large".into() }),
        };
        Ok(imageops::resize(&image, w2, h2, FilterType::Nearest))
    }
}

/// Placeholder face enhancer that returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityFaceEnhance;

impl PostProcessor for IdentityFaceEnhance {
    fn name(&self) -> &str {
        "face_enhance"
    }

    fn process(&self, image: RgbaImage) -> Result<RgbaImage, StageError> {
        Ok(image)
    }
}

/// Two ×2 upscales followed by face enhancement.
pub fn default_chain() -> Vec<Box<dyn PostProcessor>> {
    vec![Box::new(Upscale2x), Box::new(Upscale2x), Box::new(IdentityFaceEnhance)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostOutcome {
    pub image: RgbaImage,
    /// Set when a stage failed; `image` is then the last good raster.
    pub degraded: Option<StageError>,
}

/// Runs `stages` in order, stopping at the first failure.
pub fn postprocess(image: RgbaImage, stages: &[Box<dyn PostProcessor>]) -> PostOutcome {
    let mut current = image;
    for stage in stages {
        let before = current.clone();
        match stage.process(current) {
            Ok(next) => current = next,
            Err(e) => return PostOutcome { image: before, degraded: Some(e) },
        }
    }
    PostOutcome { image: current, degraded: None }
}
