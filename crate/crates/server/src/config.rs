use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;

use bodyprompt_core::Booth;
use clap::Parser;

/// A kiosk station and the booth it stands in, written `id:booth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationSpec {
    pub id: String,
    pub booth: Booth,
}

impl FromStr for StationSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, booth) = s.split_once(':').ok_or_else(|| format!("station `{s}` must look like id:public"))?;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("station id `{id}` must be non-empty ASCII letters, digits, - or _"));
        }
        Ok(Self { id: id.to_string(), booth: booth.parse()? })
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "bodyprompt-server", about = "Body-prompting installation server")]
pub struct ApiConfig {
    #[arg(long, env = "BODYPROMPT_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,

    /// Shared secret for webhook signatures.
    #[arg(long, env = "BODYPROMPT_WEBHOOK_SECRET", default_value = "", hide_env_values = true)]
    pub webhook_secret: String,

    /// Keys pickup-code hashes in the store; defaults to the webhook secret.
    #[arg(long, env = "BODYPROMPT_CODE_SECRET", hide_env_values = true)]
    pub code_secret: Option<String>,

    /// Default long-poll park time in seconds.
    #[arg(long, env = "BODYPROMPT_LONG_POLL_TIMEOUT", default_value_t = 25)]
    pub long_poll_timeout: u64,

    /// External generation server; the built-in mock is used when absent.
    #[arg(long, env = "BODYPROMPT_BACKEND_URL")]
    pub backend_url: Option<String>,

    /// Public URL of this server's webhook, given to the backend. Without it
    /// the backend is polled.
    #[arg(long, env = "BODYPROMPT_CALLBACK_URL")]
    pub callback_url: Option<String>,

    /// External pose detector; the deterministic stub is used when absent.
    #[arg(long, env = "BODYPROMPT_POSE_URL")]
    pub pose_url: Option<String>,

    /// Show the generated image on the kiosk once it is ready.
    #[arg(long, env = "BODYPROMPT_INLINE_RESULTS")]
    pub inline_results: bool,

    /// Repeatable `id:booth`, e.g. `--station kiosk-1:public`.
    #[arg(long = "station", env = "BODYPROMPT_STATIONS", value_delimiter = ',', required = true)]
    pub stations: Vec<StationSpec>,

    #[arg(long, env = "BODYPROMPT_CATALOG")]
    pub catalog: PathBuf,

    #[arg(long, env = "BODYPROMPT_WORDLIST_FIRST")]
    pub wordlist_first: PathBuf,

    #[arg(long, env = "BODYPROMPT_WORDLIST_SECOND")]
    pub wordlist_second: PathBuf,

    /// Results, feed and logs live here.
    #[arg(long, env = "BODYPROMPT_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,

    /// Kiosk and viewer assets served at `/`.
    #[arg(long, env = "BODYPROMPT_STATIC_DIR", default_value = "static")]
    pub static_dir: PathBuf,

    /// Root of every derived seed (poses, generation, galleries, codes).
    #[arg(long = "seed", env = "BODYPROMPT_SEED", default_value_t = 0)]
    pub deployment_seed: u64,

    #[arg(long, env = "BODYPROMPT_MAX_UPLOAD_BYTES", default_value_t = 8 * 1024 * 1024)]
    pub max_upload_bytes: usize,

    #[arg(long, env = "BODYPROMPT_NEGATIVE_PROMPT")]
    pub negative_prompt: Option<String>,

    /// Output size before upscaling, as WIDTHxHEIGHT.
    #[arg(long, env = "BODYPROMPT_BASE_SIZE", default_value = "512x512", value_parser = parse_size)]
    pub base_size: (u32, u32),

    /// Allow an empty webhook secret. For local testing only.
    #[arg(long)]
    pub insecure: bool,
}

pub const MAX_LONG_POLL_SECS: u64 = 60;

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    Ok((w.parse().map_err(|e| format!("width: {e}"))?, h.parse().map_err(|e| format!("height: {e}"))?))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("webhook secret must be set (or pass --insecure for local testing)")]
    MissingSecret,
    #[error("long-poll timeout {0}s outside 1..={MAX_LONG_POLL_SECS}")]
    LongPollTimeout(u64),
    #[error("station `{0}` listed twice")]
    DuplicateStation(String),
    #[error("upload limit must be positive")]
    UploadLimit,
}

impl ApiConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.webhook_secret.is_empty() && !self.insecure {
            return Err(ConfigError::MissingSecret);
        }
        if !(1..=MAX_LONG_POLL_SECS).contains(&self.long_poll_timeout) {
            return Err(ConfigError::LongPollTimeout(self.long_poll_timeout));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.stations {
            if !seen.insert(&s.id) {
                return Err(ConfigError::DuplicateStation(s.id.clone()));
            }
        }
        if self.max_upload_bytes == 0 {
            return Err(ConfigError::UploadLimit);
        }
        Ok(())
    }

    pub fn code_secret(&self) -> &str {
        self.code_secret.as_deref().unwrap_or(&self.webhook_secret)
    }
}
