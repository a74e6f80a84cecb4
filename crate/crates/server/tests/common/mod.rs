//! Spawns a real server on an ephemeral port with a manual clock.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use bodyprompt_core::pipeline::{
    sign_payload, BackendError, CompletionMode, GenerationBackend, GenerationRequest, JobId, Submission,
    SIGNATURE_HEADER,
};
use bodyprompt_core::pose::PoseExtractor;
use bodyprompt_core::{ManualClock, Timestamp};
use bodyprompt_server::{build_state, router, ApiConfig, AppState, Overrides};
use clap::Parser;
use reqwest::StatusCode;
use serde_json::{json, Value};

pub const SECRET: &str = "test-webhook-secret";
pub const START: Timestamp = Timestamp(1_700_000_000_000);

pub fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub struct Setup {
    pub stations: Vec<&'static str>,
    pub seed: u64,
    pub base_size: &'static str,
    pub max_upload_bytes: usize,
    /// Custom word lists; the shipped ones otherwise.
    pub wordlists: Option<(Vec<String>, Vec<String>)>,
    pub extractor: Option<Arc<dyn PoseExtractor>>,
    pub backend: Option<Arc<dyn GenerationBackend>>,
    /// Reuse a data directory, e.g. to restart over an existing store.
    pub root: Option<PathBuf>,
    pub inline_results: bool,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            stations: vec!["k1:public"],
            seed: 7,
            base_size: "64x64",
            max_upload_bytes: 1 << 20,
            wordlists: None,
            extractor: None,
            backend: None,
            root: None,
            inline_results: false,
        }
    }
}

pub struct Harness {
    pub base: String,
    pub clock: ManualClock,
    pub state: Arc<AppState>,
    pub http: reqwest::Client,
    pub root: PathBuf,
    _tmp: Option<tempfile::TempDir>,
    server: tokio::task::JoinHandle<()>,
}

pub async fn start(setup: Setup) -> Harness {
    let (tmp, root) = match setup.root {
        Some(r) => (None, r),
        None => {
            let t = tempfile::tempdir().unwrap();
            let r = t.path().to_path_buf();
            (Some(t), r)
        }
    };
    let static_dir = root.join("static");
    std::fs::create_dir_all(&static_dir).unwrap();
    std::fs::write(static_dir.join("index.html"), "<!doctype html><title>kiosk</title>").unwrap();
    let (first, second) = match setup.wordlists {
        Some((a, b)) => {
            std::fs::write(root.join("first.txt"), a.join("\n")).unwrap();
            std::fs::write(root.join("second.txt"), b.join("\n")).unwrap();
            (root.join("first.txt"), root.join("second.txt"))
        }
        None => (repo_path("assets/wordlists/first.txt"), repo_path("assets/wordlists/second.txt")),
    };
    let mut args: Vec<String> = vec!["bodyprompt-server".into()];
    for s in &setup.stations {
        args.extend(["--station".into(), (*s).into()]);
    }
    let path = |p: &Path| p.display().to_string();
    args.extend([
        "--webhook-secret".into(),
        SECRET.into(),
        "--catalog".into(),
        path(&repo_path("assets/demo-catalog/manifest.json")),
        "--wordlist-first".into(),
        path(&first),
        "--wordlist-second".into(),
        path(&second),
        "--data-dir".into(),
        path(&root.join("data")),
        "--static-dir".into(),
        path(&static_dir),
        "--seed".into(),
        setup.seed.to_string(),
        "--base-size".into(),
        setup.base_size.into(),
        "--max-upload-bytes".into(),
        setup.max_upload_bytes.to_string(),
    ]);
    if setup.inline_results {
        args.push("--inline-results".into());
    }
    let config = ApiConfig::try_parse_from(args).unwrap();
    let clock = ManualClock::new(START);
    let overrides = Overrides {
        clock: Some(Arc::new(clock.clone())),
        backend: setup.backend,
        extractor: setup.extractor,
        timings: None,
    };
    let state = build_state(config, overrides).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(Arc::clone(&state));
    let server = tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let http = reqwest::Client::builder().no_proxy().timeout(Duration::from_secs(30)).build().unwrap();
    Harness { base, clock, state, http, root, _tmp: tmp, server }
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
}

impl Harness {
    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn advance(&self, secs: f64) {
        self.clock.advance(Duration::from_secs_f64(secs));
    }

    async fn reply(r: reqwest::Response) -> Reply {
        let status = r.status();
        let text = r.text().await.unwrap();
        Reply { status, body: serde_json::from_str(&text).unwrap_or(Value::String(text)) }
    }

    pub async fn get(&self, path: &str) -> Reply {
        Self::reply(self.http.get(format!("{}{path}", self.base)).send().await.unwrap()).await
    }

    pub async fn get_bytes(&self, path: &str) -> (StatusCode, Vec<u8>) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.bytes().await.unwrap().to_vec())
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        Self::reply(self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap()).await
    }

    pub async fn post_raw(&self, path: &str, body: Vec<u8>, headers: &[(&str, String)]) -> Reply {
        let mut req = self.http.post(format!("{}{path}", self.base)).body(body);
        for (k, v) in headers {
            req = req.header(*k, v);
        }
        Self::reply(req.send().await.unwrap()).await
    }

    pub async fn consent(&self, station: &str) -> Reply {
        self.post(&format!("/station/{station}/consent"), json!({})).await
    }

    pub async fn select(&self, station: &str, artwork: &str) -> Reply {
        self.post(&format!("/station/{station}/select"), json!({ "artwork_id": artwork })).await
    }

    pub async fn capture(&self, station: &str, bytes: Vec<u8>) -> Reply {
        self.post_raw(&format!("/station/{station}/capture"), bytes, &[("content-type", "image/png".into())]).await
    }

    pub async fn status(&self, station: &str) -> Reply {
        self.get(&format!("/station/{station}/status")).await
    }

    /// Consent, select, wait out the countdown and capture.
    pub async fn walk(&self, station: &str, artwork: &str, capture: Vec<u8>) -> Reply {
        let r = self.consent(station).await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        let r = self.select(station, artwork).await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        self.advance(10.0);
        self.capture(station, capture).await
    }

    pub async fn webhook(&self, body: &Value) -> Reply {
        let bytes = serde_json::to_vec(body).unwrap();
        let sig = sign_payload(SECRET.as_bytes(), &bytes);
        self.post_raw("/webhook/generation", bytes, &[(SIGNATURE_HEADER, sig), ("content-type", "application/json".into())])
            .await
    }

    pub async fn stop(self) -> Option<tempfile::TempDir> {
        self.server.abort();
        let _ = self.server.await;
        self.state.log.flush().unwrap();
        self._tmp
    }
}

/// A small valid PNG camera frame.
pub fn frame_png(w: u32, h: u32, shade: u8) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image::RgbImage::from_pixel(w, h, image::Rgb([shade, shade / 2, 255 - shade]))
        .write_to(&mut buf, image::ImageFormat::Png)
        .unwrap();
    buf.into_inner()
}

/// Accepts every job and leaves completion to signed webhook calls.
#[derive(Debug, Default)]
pub struct WebhookBackend {
    next: AtomicU64,
}

#[async_trait]
impl GenerationBackend for WebhookBackend {
    fn completion_mode(&self) -> CompletionMode {
        CompletionMode::Webhook
    }

    async fn submit(&self, _req: &GenerationRequest) -> Result<Submission, BackendError> {
        let n = self.next.fetch_add(1, Ordering::SeqCst) + 1;
        Ok(Submission { job_id: JobId(format!("job-{n}")), completion: None })
    }
}

/// Every file under `dir` containing `needle`.
pub fn files_containing(dir: &Path, needle: &[u8]) -> (usize, Vec<PathBuf>) {
    let mut files = 0;
    let mut hits = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files += 1;
                if std::fs::read(&p).unwrap().windows(needle.len()).any(|w| w == needle) {
                    hits.push(p);
                }
            }
        }
    }
    (files, hits)
}
