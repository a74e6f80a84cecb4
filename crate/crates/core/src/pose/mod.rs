//! Body-prompt data model: anonymized multi-person keypoint skeletons.
//!
//! A [`PoseSkeleton`] holds one [`Person`] per detected body, each with exactly
//! eighteen keypoints in COCO-18 order. Coordinates are normalized to `[0, 1]`
//! with `y` growing downward, so one skeleton serves every capture and render
//! resolution. The types carry no face-landmark or finger data.

mod dynamism;
mod extract;
mod render;

pub use dynamism::{assess_dynamism, classify_dynamism, DynamismAssessment, DynamismRating, PersonDynamism};
pub use extract::{
    canonical_standing, extract_pose, ExtractContext, ExtractError, HttpPoseExtractor, PoseExtractor,
    StubExtractor,
};
pub use render::{render_skeleton, stroke_half_width, BONES, PERSON_COLORS};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

/// Keypoints per person.
pub const KEYPOINT_COUNT: usize = 18;

/// COCO-18 joint order, as emitted by OpenPose-style body detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Nose = 0,
    Neck = 1,
    RightShoulder = 2,
    RightElbow = 3,
    RightWrist = 4,
    LeftShoulder = 5,
    LeftElbow = 6,
    LeftWrist = 7,
    RightHip = 8,
    RightKnee = 9,
    RightAnkle = 10,
    LeftHip = 11,
    LeftKnee = 12,
    LeftAnkle = 13,
    RightEye = 14,
    LeftEye = 15,
    RightEar = 16,
    LeftEar = 17,
}

impl Joint {
    pub const ALL: [Joint; KEYPOINT_COUNT] = [
        Joint::Nose,
        Joint::Neck,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::RightEye,
        Joint::LeftEye,
        Joint::RightEar,
        Joint::LeftEar,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::Neck => "neck",
            Joint::RightShoulder => "right_shoulder",
            Joint::RightElbow => "right_elbow",
            Joint::RightWrist => "right_wrist",
            Joint::LeftShoulder => "left_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightHip => "right_hip",
            Joint::RightKnee => "right_knee",
            Joint::RightAnkle => "right_ankle",
            Joint::LeftHip => "left_hip",
            Joint::LeftKnee => "left_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightEye => "right_eye",
            Joint::LeftEye => "left_eye",
            Joint::RightEar => "right_ear",
            Joint::LeftEar => "left_ear",
        }
    }
}

/// A single detected joint. `confidence == 0` marks the joint as missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint { x: 0.0, y: 0.0, confidence: 0.0 };

    pub const fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }
}

/// One body: exactly [`KEYPOINT_COUNT`] keypoints, at least one present.
#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    keypoints: [Keypoint; KEYPOINT_COUNT],
}

impl Person {
    pub fn new(keypoints: [Keypoint; KEYPOINT_COUNT]) -> Result<Self, PoseError> {
        Self::validated(keypoints, "keypoints")
    }

    fn validated(keypoints: [Keypoint; KEYPOINT_COUNT], field: &str) -> Result<Self, PoseError> {
        for (j, kp) in keypoints.iter().enumerate() {
            check_keypoint(kp, &format!("{field}[{j}]"))?;
        }
        if !keypoints.iter().any(Keypoint::is_present) {
            return Err(PoseError::EmptyPerson { field: field.to_string() });
        }
        Ok(Self { keypoints })
    }

    pub fn keypoints(&self) -> &[Keypoint; KEYPOINT_COUNT] {
        &self.keypoints
    }

    /// The joint if it was detected.
    pub fn joint(&self, joint: Joint) -> Option<&Keypoint> {
        let kp = &self.keypoints[joint.index()];
        kp.is_present().then_some(kp)
    }

    /// Maps every keypoint through `f`, re-validating the result.
    pub fn map_points(&self, mut f: impl FnMut(Keypoint) -> Keypoint) -> Result<Self, PoseError> {
        let mut keypoints = self.keypoints;
        for kp in keypoints.iter_mut() {
            *kp = f(*kp);
        }
        Self::new(keypoints)
    }
}

fn check_keypoint(kp: &Keypoint, field: &str) -> Result<(), PoseError> {
    if !kp.confidence.is_finite() || !(0.0..=1.0).contains(&kp.confidence) {
        return Err(PoseError::Range { field: format!("{field}.confidence"), value: kp.confidence });
    }
    if !kp.x.is_finite() {
        return Err(PoseError::Range { field: format!("{field}.x"), value: kp.x });
    }
    if !kp.y.is_finite() {
        return Err(PoseError::Range { field: format!("{field}.y"), value: kp.y });
    }
    if kp.is_present() {
        if !(0.0..=1.0).contains(&kp.x) {
            return Err(PoseError::Range { field: format!("{field}.x"), value: kp.x });
        }
        if !(0.0..=1.0).contains(&kp.y) {
            return Err(PoseError::Range { field: format!("{field}.y"), value: kp.y });
        }
    }
    Ok(())
}

/// Pixel dimensions of the frame a skeleton was detected in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: u32,
    pub height: u32,
}

impl FrameSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }
}

/// The body prompt: every person detected in one capture.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSkeleton {
    persons: Vec<Person>,
    capture_size: FrameSize,
}

impl PoseSkeleton {
    pub fn new(persons: Vec<Person>, capture_size: FrameSize) -> Result<Self, PoseError> {
        if capture_size.width == 0 || capture_size.height == 0 {
            return Err(PoseError::InvalidSize { width: capture_size.width, height: capture_size.height });
        }
        Ok(Self { persons, capture_size })
    }

    /// A skeleton with no persons, used for pose-free requests.
    pub fn empty(capture_size: FrameSize) -> Self {
        Self { persons: Vec::new(), capture_size }
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn capture_size(&self) -> FrameSize {
        self.capture_size
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoseError {
    #[error("malformed pose document at `{field}`: {reason}")]
    Parse { field: String, reason: String },
    #[error("`{field}` holds {found} keypoints, expected {KEYPOINT_COUNT}")]
    Schema { field: String, found: usize },
    #[error("`{field}` = {value} is outside [0, 1]")]
    Range { field: String, value: f64 },
    #[error("`{field}` has no keypoint with positive confidence")]
    EmptyPerson { field: String },
    #[error("invalid dimensions {width}x{height}")]
    InvalidSize { width: u32, height: u32 },
}

fn parse_err(field: impl Into<String>, reason: impl Into<String>) -> PoseError {
    PoseError::Parse { field: field.into(), reason: reason.into() }
}

/// Parses a pose document:
/// `{"persons":[{"keypoints":[[x,y,c], ...18]}], "capture_size":[w,h]}`.
pub fn parse_pose(doc: &str) -> Result<PoseSkeleton, PoseError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| parse_err("$", e.to_string()))?;
    parse_pose_value(&value)
}

pub fn parse_pose_value(value: &Value) -> Result<PoseSkeleton, PoseError> {
    let root = value.as_object().ok_or_else(|| parse_err("$", "expected an object"))?;

    let persons_value = root.get("persons").ok_or_else(|| parse_err("persons", "missing"))?;
    let persons_array = persons_value.as_array().ok_or_else(|| parse_err("persons", "expected an array"))?;

    let mut persons = Vec::with_capacity(persons_array.len());
    for (i, person) in persons_array.iter().enumerate() {
        let field = format!("persons[{i}]");
        let obj = person.as_object().ok_or_else(|| parse_err(&field, "expected an object"))?;
        let kp_field = format!("{field}.keypoints");
        let kps = obj
            .get("keypoints")
            .ok_or_else(|| parse_err(&kp_field, "missing"))?
            .as_array()
            .ok_or_else(|| parse_err(&kp_field, "expected an array"))?;
        if kps.len() != KEYPOINT_COUNT {
            return Err(PoseError::Schema { field: kp_field, found: kps.len() });
        }
        let mut keypoints = [Keypoint::MISSING; KEYPOINT_COUNT];
        for (j, triple) in kps.iter().enumerate() {
            let f = format!("{kp_field}[{j}]");
            let items = triple.as_array().ok_or_else(|| parse_err(&f, "expected [x, y, confidence]"))?;
            if items.len() != 3 {
                return Err(parse_err(&f, format!("expected 3 numbers, found {}", items.len())));
            }
            let mut nums = [0.0; 3];
            for (k, item) in items.iter().enumerate() {
                nums[k] = item.as_f64().ok_or_else(|| parse_err(format!("{f}[{k}]"), "expected a number"))?;
            }
            keypoints[j] = Keypoint::new(nums[0], nums[1], nums[2]);
        }
        persons.push(Person::validated(keypoints, &kp_field)?);
    }

    let size = root
        .get("capture_size")
        .ok_or_else(|| parse_err("capture_size", "missing"))?
        .as_array()
        .ok_or_else(|| parse_err("capture_size", "expected [width, height]"))?;
    if size.len() != 2 {
        return Err(parse_err("capture_size", "expected [width, height]"));
    }
    let dim = |i: usize| -> Result<u32, PoseError> {
        size[i]
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| parse_err(format!("capture_size[{i}]"), "expected a non-negative integer"))
    };
    let capture_size = FrameSize::new(dim(0)?, dim(1)?);
    if capture_size.width == 0 || capture_size.height == 0 {
        return Err(parse_err("capture_size", "dimensions must be positive"));
    }

    Ok(PoseSkeleton { persons, capture_size })
}

#[derive(Serialize)]
struct DocPerson {
    keypoints: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct Doc {
    persons: Vec<DocPerson>,
    capture_size: [u32; 2],
}

impl PoseSkeleton {
    fn doc(&self) -> Doc {
        Doc {
            persons: self
                .persons
                .iter()
                .map(|p| DocPerson {
                    keypoints: p.keypoints.iter().map(|k| [k.x, k.y, k.confidence]).collect(),
                })
                .collect(),
            capture_size: [self.capture_size.width, self.capture_size.height],
        }
    }
}

/// Serializes to the pose document wire format.
pub fn serialize_pose(skel: &PoseSkeleton) -> String {
    serde_json::to_string(&skel.doc()).expect("pose document serialization is infallible")
}

impl Serialize for PoseSkeleton {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PoseSkeleton {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        parse_pose_value(&value).map_err(serde::de::Error::custom)
    }
}
