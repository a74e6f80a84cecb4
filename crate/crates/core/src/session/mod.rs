//! Kiosk session flow as an explicit, clock-injected state machine.
//!
//! ```text
//! Consent --ConsentGiven--> Gallery --ArtworkSelected/StartCountdown--> Countdown
//!    ^                                                                     | Tick >= deadline
//!    |                                                                     v
//!    +------ Reset <--Tick >= reset_deadline-- Submitted <--CaptureTaken-- Capturing
//! ```
//!
//! [`SessionState::advance`] is pure: it never reads a clock and never
//! draws randomness, so any recorded run can be replayed exactly.

mod codes;
mod view;

pub use codes::{CodeError, CodeGenerator, CodeRegistry, PickupCode, Wordlists};
pub use view::KioskView;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::Booth;

/// Failed pose detections tolerated before a request proceeds pose-free.
pub const MAX_POSE_RETRIES: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Consent,
    Gallery,
    Countdown,
    Capturing,
    Submitted,
    Reset,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Consent => "consent",
            Phase::Gallery => "gallery",
            Phase::Countdown => "countdown",
            Phase::Capturing => "capturing",
            Phase::Submitted => "submitted",
            Phase::Reset => "reset",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    ConsentGiven,
    ArtworkSelected(String),
    StartCountdown,
    /// The capture was accepted; carries the code issued for it.
    CaptureTaken(PickupCode),
    /// Pose detection found nobody; the visitor may try again.
    PoseNotFound,
    /// The generation backend accepted the job.
    SubmissionAcked(String),
    /// The pipeline could not take the job.
    SubmissionFailed(String),
    Tick,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ConsentGiven => "consent_given",
            Event::ArtworkSelected(_) => "artwork_selected",
            Event::StartCountdown => "start_countdown",
            Event::CaptureTaken(_) => "capture_taken",
            Event::PoseNotFound => "pose_not_found",
            Event::SubmissionAcked(_) => "submission_acked",
            Event::SubmissionFailed(_) => "submission_failed",
            Event::Tick => "tick",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionTimings {
    pub countdown: Duration,
    pub reset: Duration,
    /// How long the station waits in `Capturing` for an upload.
    pub capture_timeout: Duration,
}

impl Default for SessionTimings {
    fn default() -> Self {
        Self {
            countdown: Duration::from_secs(10),
            reset: Duration::from_secs(60),
            capture_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("event `{event}` is not allowed in phase `{phase}`")]
    IllegalEvent { phase: Phase, event: &'static str },
    #[error("clock went backwards: {now} < {last}")]
    ClockRegression { last: Timestamp, now: Timestamp },
    #[error("no artwork selected")]
    NoArtworkSelected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    phase: Phase,
    station_id: String,
    booth: Booth,
    timings: SessionTimings,
    selected_artwork: Option<String>,
    countdown_deadline: Option<Timestamp>,
    capture_deadline: Option<Timestamp>,
    reset_deadline: Option<Timestamp>,
    code: Option<PickupCode>,
    job_id: Option<String>,
    pose_retries: u8,
    gallery_seed: u64,
    last_event_at: Option<Timestamp>,
    error: Option<String>,
}

/// Result of feeding one event to the machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advance {
    pub state: SessionState,
    /// Phases entered, in order. Empty when nothing changed phase.
    pub entered: Vec<Phase>,
    pub rejection: Option<Rejection>,
}

impl SessionState {
    pub fn new(station_id: impl Into<String>, booth: Booth, timings: SessionTimings, gallery_seed: u64) -> Self {
        Self {
            phase: Phase::Consent,
            station_id: station_id.into(),
            booth,
            timings,
            selected_artwork: None,
            countdown_deadline: None,
            capture_deadline: None,
            reset_deadline: None,
            code: None,
            job_id: None,
            pose_retries: 0,
            gallery_seed,
            last_event_at: None,
            error: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn station_id(&self) -> &str {
        &self.station_id
    }
    pub fn booth(&self) -> Booth {
        self.booth
    }
    pub fn timings(&self) -> SessionTimings {
        self.timings
    }
    pub fn selected_artwork(&self) -> Option<&str> {
        self.selected_artwork.as_deref()
    }
    pub fn countdown_deadline(&self) -> Option<Timestamp> {
        self.countdown_deadline
    }
    pub fn capture_deadline(&self) -> Option<Timestamp> {
        self.capture_deadline
    }
    pub fn reset_deadline(&self) -> Option<Timestamp> {
        self.reset_deadline
    }
    pub fn code(&self) -> Option<&PickupCode> {
        self.code.as_ref()
    }
    pub fn job_id(&self) -> Option<&str> {
        self.job_id.as_deref()
    }
    pub fn pose_retries(&self) -> u8 {
        self.pose_retries
    }
    pub fn pose_retries_exhausted(&self) -> bool {
        self.pose_retries >= MAX_POSE_RETRIES
    }
    pub fn gallery_seed(&self) -> u64 {
        self.gallery_seed
    }
    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn advance(&self, event: Event, now: Timestamp) -> Advance {
        if let Some(last) = self.last_event_at {
            if now < last {
                return self.reject(Rejection::ClockRegression { last, now });
            }
        }
        let mut next = self.clone();
        next.last_event_at = Some(now);
        let mut entered = Vec::new();
        // Deadlines that passed before this event apply first, so a late
        // event is judged against the phase the station is really in.
        next.catch_up(now, &mut entered);
        let caught_up = Advance { state: next.clone(), entered: entered.clone(), rejection: None };
        let reject = |rejection| match caught_up.entered.is_empty() {
            true => self.reject(rejection),
            false => Advance { rejection: Some(rejection), ..caught_up },
        };

        match (next.phase, event) {
            (_, Event::Tick) => {}
            (Phase::Consent, Event::ConsentGiven) => {
                next.error = None;
                next.enter(Phase::Gallery, &mut entered);
            }
            (Phase::Gallery, Event::ArtworkSelected(id)) => next.selected_artwork = Some(id),
            (Phase::Gallery, Event::StartCountdown) => {
                if next.selected_artwork.is_none() {
                    return reject(Rejection::NoArtworkSelected);
                }
                next.countdown_deadline = Some(now.saturating_add(self.timings.countdown));
                next.enter(Phase::Countdown, &mut entered);
            }
            (Phase::Capturing, Event::CaptureTaken(code)) => {
                next.capture_deadline = None;
                next.code = Some(code);
                next.reset_deadline = Some(now.saturating_add(self.timings.reset));
                next.gallery_seed = next_seed(next.gallery_seed);
                next.enter(Phase::Submitted, &mut entered);
            }
            (Phase::Capturing, Event::PoseNotFound) if !next.pose_retries_exhausted() => {
                next.pose_retries += 1;
            }
            (Phase::Submitted, Event::SubmissionAcked(job)) if next.job_id.is_none() => {
                next.job_id = Some(job);
            }
            (Phase::Submitted, Event::SubmissionFailed(reason)) => {
                next.restart(Some(reason), &mut entered);
            }
            (phase, event) => return reject(Rejection::IllegalEvent { phase, event: event.name() }),
        }
        Advance { state: next, entered, rejection: None }
    }

    fn reject(&self, rejection: Rejection) -> Advance {
        Advance { state: self.clone(), entered: Vec::new(), rejection: Some(rejection) }
    }

    fn enter(&mut self, phase: Phase, entered: &mut Vec<Phase>) {
        self.phase = phase;
        entered.push(phase);
    }

    /// Applies every deadline that has passed by `now`.
    fn catch_up(&mut self, now: Timestamp, entered: &mut Vec<Phase>) {
        loop {
            match self.phase {
                Phase::Countdown if self.countdown_deadline.is_some_and(|d| now >= d) => {
                    let fired = self.countdown_deadline.take().expect("checked");
                    self.capture_deadline = Some(fired.saturating_add(self.timings.capture_timeout));
                    self.enter(Phase::Capturing, entered);
                }
                Phase::Capturing if self.capture_deadline.is_some_and(|d| now >= d) => {
                    self.restart(Some("capture timed out".into()), entered);
                }
                Phase::Submitted if self.reset_deadline.is_some_and(|d| now >= d) => {
                    self.enter(Phase::Reset, entered);
                    self.restart(None, entered);
                }
                _ => break,
            }
        }
    }

    fn restart(&mut self, error: Option<String>, entered: &mut Vec<Phase>) {
        self.selected_artwork = None;
        self.countdown_deadline = None;
        self.capture_deadline = None;
        self.reset_deadline = None;
        self.code = None;
        self.job_id = None;
        self.pose_retries = 0;
        self.error = error;
        self.enter(Phase::Consent, entered);
    }

    /// Checks the structural invariants tying fields to the phase.
    pub fn check_invariants(&self) -> Result<(), String> {
        let p = self.phase;
        if self.countdown_deadline.is_some() != (p == Phase::Countdown) {
            return Err(format!("countdown_deadline set={} in {p}", self.countdown_deadline.is_some()));
        }
        if self.code.is_some() != matches!(p, Phase::Submitted | Phase::Reset) {
            return Err(format!("code set={} in {p}", self.code.is_some()));
        }
        let after_gallery = matches!(p, Phase::Countdown | Phase::Capturing | Phase::Submitted | Phase::Reset);
        if after_gallery && self.selected_artwork.is_none() {
            return Err(format!("no artwork selected in {p}"));
        }
        if matches!(p, Phase::Consent) && self.selected_artwork.is_some() {
            return Err("artwork selected in consent".into());
        }
        if self.job_id.is_some() && p != Phase::Submitted {
            return Err(format!("job in flight in {p}"));
        }
        Ok(())
    }
}

/// Derives a reproducible per-purpose seed from a deployment seed, e.g.
/// `derive_seed(base, "pose/kiosk-1", 3)` for the third session at a station.
pub fn derive_seed(base: u64, label: &str, n: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::new()
        .chain_update(base.to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update(n.to_le_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// SplitMix64 step; reshuffles the gallery after each generation.
fn next_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
