use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use bodyprompt_core::catalog::{load_catalog, Catalog};
use bodyprompt_core::pipeline::{GenerationBackend, GenerationParams, HttpBackend, JobId, MockBackend, Pipeline};
use bodyprompt_core::pose::{FrameSize, HttpPoseExtractor, PoseExtractor, StubExtractor};
use bodyprompt_core::session::{
    derive_seed, CodeGenerator, CodeRegistry, Event, Phase, SessionState, SessionTimings, Wordlists,
};
use bodyprompt_core::store::{FsStore, InteractionLog, LogError, LogRecord};
use bodyprompt_core::{Clock, SystemClock, Timestamp};
use tokio::sync::Mutex;

use crate::config::{ApiConfig, StationSpec};
use crate::error::ApiError;

const LOG_QUEUE_CAPACITY: usize = 4096;

/// One kiosk and its current visitor session.
#[derive(Debug)]
pub struct Station {
    pub spec: StationSpec,
    pub state: SessionState,
    /// Incremented on every consent; names the session and feeds seeds.
    pub session_no: u64,
}

impl Station {
    pub fn session_id(&self) -> String {
        format!("{}-{}", self.spec.id, self.session_no)
    }
}

pub struct AppState {
    pub config: ApiConfig,
    pub catalog: Arc<Catalog>,
    pub stations: HashMap<String, Arc<Mutex<Station>>>,
    pub codes: CodeRegistry,
    pub pipeline: Arc<Pipeline>,
    pub store: Arc<FsStore>,
    pub log: Arc<InteractionLog>,
    pub clock: Arc<dyn Clock>,
    pub extractor: Arc<dyn PoseExtractor>,
    pub params: GenerationParams,
}

/// Replaceable parts, for tests and embedding.
#[derive(Default)]
pub struct Overrides {
    pub clock: Option<Arc<dyn Clock>>,
    pub backend: Option<Arc<dyn GenerationBackend>>,
    pub extractor: Option<Arc<dyn PoseExtractor>>,
    pub timings: Option<SessionTimings>,
}

pub fn build_state(config: ApiConfig, overrides: Overrides) -> anyhow::Result<Arc<AppState>> {
    config.validate()?;
    let catalog = load_catalog(&config.catalog).with_context(|| format!("loading {}", config.catalog.display()))?;
    let lists = Wordlists::load(&config.wordlist_first, &config.wordlist_second)?;

    let (store, recovery) = FsStore::open(&config.data_dir, config.code_secret().as_bytes())?;
    if !recovery.orphans_removed.is_empty() || recovery.truncated_tail {
        log::warn!("store recovery: {recovery:?}");
    }
    let store = Arc::new(store);
    let log = Arc::new(InteractionLog::open(config.data_dir.join("logs/interactions.jsonl"), LOG_QUEUE_CAPACITY)?);

    let mut generator = CodeGenerator::new(lists, derive_seed(config.deployment_seed, "codes", 0));
    let taken = store.code_hashes();
    let reserved = generator.reserve_where(|code| taken.contains(&store.code_hash(code)));
    if reserved > 0 {
        log::info!("reserved {reserved} pickup codes issued by earlier runs");
    }

    let clock = overrides.clock.unwrap_or_else(|| Arc::new(SystemClock));
    let backend: Arc<dyn GenerationBackend> = match (overrides.backend, &config.backend_url) {
        (Some(b), _) => b,
        (None, Some(url)) => Arc::new(HttpBackend::new(
            url.clone(),
            config.callback_url.clone(),
            Duration::from_secs(2),
            Duration::from_secs(60),
        )?),
        (None, None) => Arc::new(MockBackend::new()),
    };
    let extractor: Arc<dyn PoseExtractor> = match (overrides.extractor, &config.pose_url) {
        (Some(e), _) => e,
        (None, Some(url)) => Arc::new(HttpPoseExtractor::new(url.clone(), Duration::from_secs(10))?),
        (None, None) => Arc::new(StubExtractor::new()),
    };
    let pipeline = Arc::new(Pipeline::new(backend, Arc::clone(&store), Arc::clone(&clock)).with_log(Arc::clone(&log)));

    let timings = overrides.timings.unwrap_or_default();
    let stations = config
        .stations
        .iter()
        .map(|spec| {
            let gallery_seed = derive_seed(config.deployment_seed, &format!("gallery/{}", spec.id), 0);
            let state = SessionState::new(spec.id.clone(), spec.booth, timings, gallery_seed);
            (spec.id.clone(), Arc::new(Mutex::new(Station { spec: spec.clone(), state, session_no: 0 })))
        })
        .collect();

    let mut params = GenerationParams {
        base_size: FrameSize { width: config.base_size.0, height: config.base_size.1 },
        ..GenerationParams::default()
    };
    if let Some(neg) = &config.negative_prompt {
        params.negative_prompt = neg.clone();
    }
    params.validate()?;

    Ok(Arc::new(AppState {
        config,
        catalog: Arc::new(catalog),
        stations,
        codes: CodeRegistry::new(generator),
        pipeline,
        store,
        log,
        clock,
        extractor,
        params,
    }))
}

impl AppState {
    pub fn station(&self, id: &str) -> Result<Arc<Mutex<Station>>, ApiError> {
        self.stations.get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("unknown station `{id}`")))
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Catches the station up to `now` and then applies `event`.
    pub fn apply(&self, station: &mut Station, event: Event) -> Result<(), ApiError> {
        let now = self.now();
        self.tick(station, now);
        let name = event.name();
        let adv = station.state.advance(event, now);
        if let Some(rejection) = adv.rejection {
            let phase = station.state.phase();
            self.write_log(LogRecord::diagnostic(now, &station.spec.id, format!("rejected {name}: {rejection:?}")));
            return Err(ApiError::Conflict { phase, message: format!("{name} not allowed in phase {phase}") });
        }
        station.state = adv.state;
        self.write_log(LogRecord::event(now, &station.spec.id, name).with_phase(station.state.phase().as_str()));
        Ok(())
    }

    /// Applies every elapsed deadline.
    pub fn tick(&self, station: &mut Station, now: Timestamp) {
        let adv = station.state.advance(Event::Tick, now);
        if adv.rejection.is_some() {
            return;
        }
        station.state = adv.state;
        for phase in adv.entered {
            self.write_log(LogRecord::event(now, &station.spec.id, "tick").with_phase(phase.as_str()));
        }
    }

    fn write_log(&self, record: LogRecord) {
        match self.log.append(record) {
            Ok(()) => {}
            Err(LogError::NonMonotonic { station, previous, given }) => {
                self.log.append_clamped(LogRecord::diagnostic(
                    previous,
                    station,
                    format!("rejected log entry stamped {given}, before {previous}"),
                ));
            }
            Err(e) => log::warn!("interaction log: {e}"),
        }
    }

    /// Moves the session owning `job` to the failure screen if it is still
    /// waiting on that job.
    pub async fn fail_session_for_job(&self, job: &JobId, reason: &str) {
        let Some(meta) = self.pipeline.job_meta(job) else { return };
        let Ok(station) = self.station(&meta.session.station_id) else { return };
        let mut st = station.lock().await;
        if st.state.phase() == Phase::Submitted && st.state.job_id() == Some(job.0.as_str()) {
            let _ = self.apply(&mut st, Event::SubmissionFailed(reason.to_string()));
        }
    }
}
