//! Core of the body-prompting installation: pose model, artwork catalog,
//! generation pipeline, kiosk session machine and privacy-preserving store.

pub mod catalog;
pub mod clock;
pub mod pipeline;
pub mod pose;
pub mod session;
pub mod store;

pub use clock::{Clock, ManualClock, SystemClock, Timestamp};

use serde::{Deserialize, Serialize};

/// Which posing area a station or result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Booth {
    Public,
    Private,
}

impl Booth {
    pub fn as_str(self) -> &'static str {
        match self {
            Booth::Public => "public",
            Booth::Private => "private",
        }
    }
}

impl std::fmt::Display for Booth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Booth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "public" => Ok(Booth::Public),
            "private" => Ok(Booth::Private),
            other => Err(format!("unknown booth `{other}`")),
        }
    }
}
