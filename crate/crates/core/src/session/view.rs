use serde::Serialize;

use super::{Phase, SessionState};
use crate::catalog::Catalog;
use crate::clock::Timestamp;
use crate::Booth;

/// What a kiosk screen needs to render the current phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KioskView {
    pub station_id: String,
    pub booth: Booth,
    pub phase: Phase,
    /// Artwork ids in display order; only populated in the gallery.
    pub gallery: Vec<String>,
    pub seconds_remaining: Option<u64>,
    /// Artwork shown small in the corner while posing.
    pub artwork_inset: Option<String>,
    pub camera_active: bool,
    pub code: Option<String>,
    pub pose_retries: u8,
    pub error: Option<String>,
}

impl SessionState {
    pub fn snapshot(&self, catalog: &Catalog, now: Timestamp) -> KioskView {
        let phase = self.phase();
        let seconds_remaining = match phase {
            Phase::Countdown => self.countdown_deadline(),
            Phase::Submitted => self.reset_deadline(),
            _ => None,
        }
        .map(|deadline| now.until(deadline).as_secs());

        KioskView {
            station_id: self.station_id().to_string(),
            booth: self.booth(),
            phase,
            gallery: if phase == Phase::Gallery { catalog.shuffled_view(self.gallery_seed()) } else { Vec::new() },
            seconds_remaining,
            artwork_inset: match phase {
                Phase::Countdown | Phase::Capturing => self.selected_artwork().map(str::to_owned),
                _ => None,
            },
            camera_active: matches!(phase, Phase::Countdown | Phase::Capturing),
            code: match phase {
                Phase::Submitted | Phase::Reset => self.code().map(|c| c.text()),
                _ => None,
            },
            pose_retries: self.pose_retries(),
            error: self.error().map(str::to_owned),
        }
    }
}
