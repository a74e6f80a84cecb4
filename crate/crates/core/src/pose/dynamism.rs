//! Codebook heuristic for how expressive a body prompt is.
//!
//! Per person:
//! - a raised arm is a wrist above its shoulder by more than 2% of the
//!   person's bounding-box height;
//! - a raised leg is an ankle above its own hip, or above the opposite knee;
//! - a wide stance is a wrist span wider than 1.5 shoulder spans.
//!
//! Any raised leg, or both arms raised, rates `High`. One raised arm or a
//! wide stance rates `Medium`. Everything else is `Low`. A skeleton rates as
//! its most dynamic person.

use serde::{Deserialize, Serialize};

use super::{Joint, Person, PoseSkeleton};

const RAISED_ARM_MARGIN: f64 = 0.02;
const WIDE_STANCE_RATIO: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamismRating {
    Low,
    Medium,
    High,
}

impl DynamismRating {
    /// Ordinal code: low = 1, medium = 2, high = 3.
    pub fn ordinal(self) -> u8 {
        match self {
            DynamismRating::Low => 1,
            DynamismRating::Medium => 2,
            DynamismRating::High => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DynamismRating::Low => "low",
            DynamismRating::Medium => "medium",
            DynamismRating::High => "high",
        }
    }
}

impl std::fmt::Display for DynamismRating {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DynamismRating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(DynamismRating::Low),
            "medium" => Ok(DynamismRating::Medium),
            "high" => Ok(DynamismRating::High),
            other => Err(format!("unknown dynamism rating `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PersonDynamism {
    pub rating: DynamismRating,
    pub raised_arms: u8,
    pub raised_legs: u8,
    pub wide_stance: bool,
    /// No rule had the joints it needs; the person defaulted to `Low`.
    pub insufficient_keypoints: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamismAssessment {
    pub rating: DynamismRating,
    pub persons: Vec<PersonDynamism>,
}

pub fn classify_dynamism(skel: &PoseSkeleton) -> DynamismRating {
    assess_dynamism(skel).rating
}

pub fn assess_dynamism(skel: &PoseSkeleton) -> DynamismAssessment {
    let persons: Vec<PersonDynamism> = skel.persons().iter().map(assess_person).collect();
    let rating = persons.iter().map(|p| p.rating).max().unwrap_or(DynamismRating::Low);
    DynamismAssessment { rating, persons }
}

fn assess_person(person: &Person) -> PersonDynamism {
    let (top, bottom) = person
        .keypoints()
        .iter()
        .filter(|k| k.is_present())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k.y), hi.max(k.y)));
    let margin = RAISED_ARM_MARGIN * (bottom - top);
    let mut evaluated = false;

    let mut raised_arms = 0u8;
    for (wrist, shoulder) in [(Joint::RightWrist, Joint::RightShoulder), (Joint::LeftWrist, Joint::LeftShoulder)] {
        if let (Some(w), Some(s)) = (person.joint(wrist), person.joint(shoulder)) {
            evaluated = true;
            if w.y < s.y - margin {
                raised_arms += 1;
            }
        }
    }

    let mut raised_legs = 0u8;
    for (ankle, hip, opposite_knee) in [
        (Joint::RightAnkle, Joint::RightHip, Joint::LeftKnee),
        (Joint::LeftAnkle, Joint::LeftHip, Joint::RightKnee),
    ] {
        let Some(a) = person.joint(ankle) else { continue };
        let above_hip = person.joint(hip).map(|h| a.y < h.y);
        let above_knee = person.joint(opposite_knee).map(|k| a.y < k.y);
        if above_hip.is_some() || above_knee.is_some() {
            evaluated = true;
        }
        if above_hip == Some(true) || above_knee == Some(true) {
            raised_legs += 1;
        }
    }

    let mut wide_stance = false;
    if let (Some(rw), Some(lw), Some(rs), Some(ls)) = (
        person.joint(Joint::RightWrist),
        person.joint(Joint::LeftWrist),
        person.joint(Joint::RightShoulder),
        person.joint(Joint::LeftShoulder),
    ) {
        evaluated = true;
        wide_stance = (rw.x - lw.x).abs() > WIDE_STANCE_RATIO * (rs.x - ls.x).abs();
    }

    let rating = if raised_legs >= 1 || raised_arms >= 2 {
        DynamismRating::High
    } else if raised_arms == 1 || wide_stance {
        DynamismRating::Medium
    } else {
        DynamismRating::Low
    };

    PersonDynamism { rating, raised_arms, raised_legs, wide_stance, insufficient_keypoints: !evaluated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{canonical_standing, FrameSize, Keypoint, KEYPOINT_COUNT};

    fn with_joint(skel: &PoseSkeleton, joint: Joint, x: f64, y: f64) -> PoseSkeleton {
        let mut kps = *skel.persons()[0].keypoints();
        kps[joint.index()] = Keypoint::new(x, y, 1.0);
        PoseSkeleton::new(vec![Person::new(kps).unwrap()], skel.capture_size()).unwrap()
    }

    #[test]
    fn relaxed_standing_is_low() {
        assert_eq!(classify_dynamism(&canonical_standing()), DynamismRating::Low);
    }

    #[test]
    fn one_wrist_above_head_is_medium() {
        let skel = with_joint(&canonical_standing(), Joint::RightWrist, 0.40, 0.12);
        let a = assess_dynamism(&skel);
        assert_eq!(a.rating, DynamismRating::Medium);
        assert_eq!(a.persons[0].raised_arms, 1);
    }

    #[test]
    fn both_wrists_raised_is_high() {
        let skel = with_joint(&canonical_standing(), Joint::RightWrist, 0.40, 0.12);
        let skel = with_joint(&skel, Joint::LeftWrist, 0.60, 0.12);
        assert_eq!(classify_dynamism(&skel), DynamismRating::High);
    }

    #[test]
    fn ankle_above_opposite_knee_is_high() {
        let skel = with_joint(&canonical_standing(), Joint::RightAnkle, 0.50, 0.68);
        let a = assess_dynamism(&skel);
        assert_eq!(a.rating, DynamismRating::High);
        assert_eq!(a.persons[0].raised_legs, 1);
    }

    #[test]
    fn wide_stance_is_medium() {
        let skel = with_joint(&canonical_standing(), Joint::RightWrist, 0.25, 0.40);
        let skel = with_joint(&skel, Joint::LeftWrist, 0.75, 0.40);
        let a = assess_dynamism(&skel);
        assert!(a.persons[0].wide_stance);
        assert_eq!(a.rating, DynamismRating::Medium);
    }

    #[test]
    fn wrist_within_margin_is_not_raised() {
        // bounding box height is 0.88 - 0.18 = 0.70, so the margin is 0.014
        let skel = with_joint(&canonical_standing(), Joint::RightWrist, 0.40, 0.29 - 0.01);
        assert_eq!(classify_dynamism(&skel), DynamismRating::Low);
    }

    #[test]
    fn head_only_person_is_flagged() {
        let mut kps = [Keypoint::MISSING; KEYPOINT_COUNT];
        kps[Joint::Nose.index()] = Keypoint::new(0.5, 0.2, 1.0);
        kps[Joint::RightEye.index()] = Keypoint::new(0.48, 0.18, 1.0);
        let skel = PoseSkeleton::new(vec![Person::new(kps).unwrap()], FrameSize::new(10, 10)).unwrap();
        let a = assess_dynamism(&skel);
        assert_eq!(a.rating, DynamismRating::Low);
        assert!(a.persons[0].insufficient_keypoints);
        assert!(!assess_dynamism(&canonical_standing()).persons[0].insufficient_keypoints);
    }

    #[test]
    fn ordering_and_codes() {
        assert!(DynamismRating::Low < DynamismRating::Medium && DynamismRating::Medium < DynamismRating::High);
        assert_eq!(DynamismRating::High.ordinal(), 3);
        assert_eq!("medium".parse::<DynamismRating>().unwrap(), DynamismRating::Medium);
    }
}
