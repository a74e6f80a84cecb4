//! HTTP service for the body-prompting installation: kiosk endpoints, the
//! viewer feed, the generation webhook and static assets on one listener.

pub mod app;
pub mod config;
pub mod error;
pub mod routes;

pub use app::{build_state, AppState, Overrides};
pub use config::{ApiConfig, StationSpec};
pub use routes::router;
