use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use bodyprompt_core::catalog::{load_catalog, Catalog};
use bodyprompt_core::pipeline::{
    compose_request, mock_generate, Completion, CompletionPayload, GenerationParams, GenerationRequest, HttpBackend,
    JobId, JobState, MockBackend, Pipeline, SessionContext, TransientCapture,
};
use bodyprompt_core::pose::{canonical_standing, render_skeleton};
use bodyprompt_core::session::PickupCode;
use bodyprompt_core::store::{FeedCursor, FsStore, InteractionLog};
use bodyprompt_core::{Booth, ManualClock, Timestamp};
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

/// SHA-256 of the final RGBA pixels for the reference request below.
const GOLDEN_FINAL_RGBA_SHA256: &str = "b83c88590b627c40750aa4d437b4a2bb55bd96cdca28820a80cd6db3f8c926e1";

const SENTINEL: &[u8] = b"SENTINEL-CAPTURE-7f3a9c";

fn demo_catalog() -> Catalog {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/demo-catalog/manifest.json");
    load_catalog(&manifest).unwrap()
}

fn request(catalog: &Catalog, artwork: &str, seed: u64, capture: Vec<u8>, session: &str) -> GenerationRequest {
    let entry = catalog.servable_entry(artwork).unwrap();
    compose_request(
        entry,
        catalog.style_ref(entry).unwrap(),
        canonical_standing(),
        false,
        TransientCapture::new(capture),
        GenerationParams::with_seed(seed),
        SessionContext { session_id: session.into(), station_id: "kiosk-1".into(), booth: Booth::Public },
    )
    .unwrap()
}

fn pipeline(root: &Path, backend: Arc<dyn bodyprompt_core::pipeline::GenerationBackend>) -> Arc<Pipeline> {
    let store = Arc::new(FsStore::open(root.join("store"), b"secret").unwrap().0);
    let log = Arc::new(InteractionLog::open(root.join("log.jsonl"), 1024).unwrap());
    let clock = Arc::new(ManualClock::new(Timestamp(1_700_000_000_000)));
    Arc::new(Pipeline::new(backend, store, clock).with_log(log))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn composed_requests_default_to_fifty_steps_at_cfg_eight() {
    let req = request(&demo_catalog(), "dancers", 1, vec![1, 2, 3], "s");
    assert_eq!(req.params.steps, 50);
    assert_eq!(req.params.cfg, 8.0);
    assert_eq!(req.prompt, demo_catalog().servable_entry("dancers").unwrap().caption_prompt);
}

#[tokio::test]
async fn mock_output_is_golden_and_four_times_the_base_size() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), Arc::new(MockBackend::new()));
    let req = request(&demo_catalog(), "dancers", 7, vec![9; 16], "s-1");
    let base = mock_generate(&req).unwrap();
    assert_eq!(base.dimensions(), (512, 512));
    let out = p.submit(req, PickupCode::new("kuu", "otter", Timestamp(0))).await.unwrap();
    let result = out.finalized.unwrap().result.unwrap();
    let img = image::load_from_memory(&result.image_png).unwrap();
    assert_eq!((img.width(), img.height()), (2048, 2048));
    assert_eq!(sha256_hex(img.to_rgba8().as_raw()), GOLDEN_FINAL_RGBA_SHA256);
}

#[test]
fn mock_draws_the_skeleton_over_the_style() {
    let req = request(&demo_catalog(), "portrait", 3, vec![], "s");
    let base = mock_generate(&req).unwrap();
    let skeleton = render_skeleton(&req.pose, 512, 512).unwrap();
    for (p, s) in base.pixels().zip(skeleton.pixels()) {
        if s.0[3] > 0 {
            assert_eq!(p.0, s.0);
        }
    }
    let mut free = req.clone();
    free.pose_free = true;
    free.pose = bodyprompt_core::pose::PoseSkeleton::empty(req.pose.capture_size());
    assert_ne!(mock_generate(&free).unwrap(), base);
}

fn scan_for(dir: &Path, needle: &[u8], hits: &mut Vec<PathBuf>, files: &mut usize) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            scan_for(&path, needle, hits, files);
        } else {
            *files += 1;
            let bytes = std::fs::read(&path).unwrap();
            if bytes.windows(needle.len()).any(|w| w == needle) {
                hits.push(path);
            }
        }
    }
}

#[tokio::test]
async fn capture_bytes_never_reach_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), Arc::new(MockBackend::new()));
    let catalog = demo_catalog();
    let ids: Vec<String> = catalog.servable().map(|e| e.id.clone()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for i in 0..100u32 {
        let mut capture = vec![0u8; rng.random_range(0..64)];
        rng.fill(&mut capture[..]);
        capture.extend_from_slice(SENTINEL);
        let artwork = &ids[rng.random_range(0..ids.len())];
        let mut req = request(&catalog, artwork, u64::from(i), capture, &format!("s-{i}"));
        req.params.base_size = bodyprompt_core::pose::FrameSize::new(64, 64);
        p.submit(req, PickupCode::new("w", format!("c{i}"), Timestamp(0))).await.unwrap();
    }
    assert_eq!(p.store().len(), 100);
    let (mut hits, mut files) = (Vec::new(), 0);
    scan_for(dir.path(), SENTINEL, &mut hits, &mut files);
    assert!(files > 200);
    assert!(hits.is_empty(), "sentinel found in {hits:?}");
}

#[derive(Default)]
struct Fixture {
    bodies: Mutex<Vec<serde_json::Value>>,
    polls: Mutex<u32>,
    image: Vec<u8>,
}

async fn fixture_server(fixture: Arc<Fixture>) -> String {
    async fn submit(State(f): State<Arc<Fixture>>, Json(body): Json<serde_json::Value>) -> Json<serde_json::Value> {
        f.bodies.lock().unwrap().push(body);
        Json(serde_json::json!({ "job_id": "abc" }))
    }
    async fn status(
        State(f): State<Arc<Fixture>>,
        axum::extract::Path(id): axum::extract::Path<String>,
    ) -> Json<CompletionPayload> {
        let mut polls = f.polls.lock().unwrap();
        *polls += 1;
        if *polls < 3 {
            return Json(CompletionPayload { job_id: id, status: "running".into(), image: None, error: None });
        }
        Json(CompletionPayload::completed(&id, &f.image))
    }
    let app = Router::new().route("/jobs", post(submit)).route("/jobs/{id}", get(status)).with_state(fixture);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn small_png() -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image::RgbaImage::from_pixel(16, 8, image::Rgba([10, 20, 30, 255]))
        .write_to(&mut buf, image::ImageFormat::Png)
        .unwrap();
    buf.into_inner()
}

#[tokio::test]
async fn http_backend_polls_the_fixture_to_completion() {
    let fixture = Arc::new(Fixture { image: small_png(), ..Fixture::default() });
    let url = fixture_server(Arc::clone(&fixture)).await;
    let backend = HttpBackend::new(&url, None, Duration::from_millis(10), Duration::from_secs(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), Arc::new(backend));
    let req = request(&demo_catalog(), "lake-dusk", 11, SENTINEL.to_vec(), "s-1");
    let sub = p.submit(req, PickupCode::new("kuu", "otter", Timestamp(0))).await.unwrap();
    assert_eq!(sub.job_id, JobId("abc".into()));
    assert!(sub.finalized.is_none());
    for _ in 0..200 {
        if p.job_state(&sub.job_id).is_some_and(|s| s.is_terminal()) {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert!(matches!(p.job_state(&sub.job_id), Some(JobState::Completed { .. })));
    let entry = &p.store().feed_since(&FeedCursor::Start, None).entries[0];
    let stored = image::load_from_memory(&p.store().read_image(&entry.result_id).unwrap()).unwrap();
    assert_eq!((stored.width(), stored.height()), (64, 32));

    let bodies = fixture.bodies.lock().unwrap();
    let body = &bodies[0];
    assert_eq!(body["steps"], 50);
    assert_eq!(body["cfg"], 8.0);
    assert_eq!(body["seed"], 11);
    assert_eq!(body["style_artwork_id"], "lake-dusk");
    assert_eq!(body["pose"]["persons"][0]["keypoints"].as_array().unwrap().len(), 18);
    assert!(body.get("callback_url").is_none());
    let encoded = base64::engine::general_purpose::STANDARD.encode(SENTINEL);
    let text = body.to_string();
    assert!(!text.contains("SENTINEL") && !text.contains(&encoded));
}

#[tokio::test]
async fn webhook_mode_waits_for_a_delivered_completion() {
    let fixture = Arc::new(Fixture { image: small_png(), ..Fixture::default() });
    let url = fixture_server(Arc::clone(&fixture)).await;
    let callback = Some("http://installation.local/webhook/generation".to_string());
    let backend = HttpBackend::new(&url, callback, Duration::from_millis(10), Duration::from_secs(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), Arc::new(backend));
    let sub = p
        .submit(request(&demo_catalog(), "radiance", 2, vec![], "s-2"), PickupCode::new("a", "b", Timestamp(0)))
        .await
        .unwrap();
    tokio::time::sleep(Duration::from_millis(60)).await;
    assert_eq!(*fixture.polls.lock().unwrap(), 0);
    assert_eq!(p.job_state(&sub.job_id), Some(JobState::Pending));
    assert_eq!(fixture.bodies.lock().unwrap()[0]["callback_url"], "http://installation.local/webhook/generation");
    let done = p.finalize(&sub.job_id, Completion::Completed { image_png: small_png() }).await.unwrap();
    assert!(!done.duplicate);
    assert_eq!(p.store().len(), 1);
    let again = p.finalize(&sub.job_id, Completion::Completed { image_png: small_png() }).await.unwrap();
    assert!(again.duplicate);
    assert_eq!(p.store().len(), 1);
}
