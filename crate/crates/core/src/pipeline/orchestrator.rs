use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::backend::{encode_png, BackendError, Completion, CompletionMode, GenerationBackend, RetryPolicy};
use super::job::{JobEvent, JobState};
use super::postprocess::{default_chain, postprocess, PostProcessor};
use super::{GeneratedResult, GenerationRequest, JobId, SessionContext};
use crate::clock::Clock;
use crate::pose::PoseSkeleton;
use crate::session::PickupCode;
use crate::store::{FsStore, InteractionLog, LogRecord, ResultDraft, StoreError};

/// What the pipeline remembers about a submitted job. Holds no capture.
#[derive(Debug, Clone, PartialEq)]
pub struct JobMeta {
    pub session: SessionContext,
    pub artwork_id: String,
    pub pose: PoseSkeleton,
    pub code: PickupCode,
}

struct JobRecord {
    meta: JobMeta,
    state: JobState,
    /// Serializes completions for this job.
    lock: Arc<tokio::sync::Mutex<()>>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("session {0} already has a job in flight")]
    SessionBusy(String),
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("backend reused job id {0}")]
    DuplicateJobId(JobId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Outcome of delivering a completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    pub job_id: JobId,
    pub state: JobState,
    /// Present when the job completed.
    pub result: Option<GeneratedResult>,
    /// True when the job was already terminal and nothing changed.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submitted {
    pub job_id: JobId,
    /// Present when the backend completed the job inline.
    pub finalized: Option<Finalized>,
}

pub struct Pipeline {
    backend: Arc<dyn GenerationBackend>,
    stages: Vec<Box<dyn PostProcessor>>,
    store: Arc<FsStore>,
    log: Option<Arc<InteractionLog>>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    jobs: Mutex<HashMap<JobId, JobRecord>>,
    in_flight: Mutex<HashMap<String, JobId>>,
}

impl Pipeline {
    pub fn new(backend: Arc<dyn GenerationBackend>, store: Arc<FsStore>, clock: Arc<dyn Clock>) -> Self {
        Self {
            backend,
            stages: default_chain(),
            store,
            log: None,
            clock,
            retry: RetryPolicy::default(),
            jobs: Mutex::new(HashMap::new()),
            in_flight: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_stages(mut self, stages: Vec<Box<dyn PostProcessor>>) -> Self {
        self.stages = stages;
        self
    }

    pub fn with_log(mut self, log: Arc<InteractionLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn store(&self) -> &Arc<FsStore> {
        &self.store
    }

    pub fn job_state(&self, job: &JobId) -> Option<JobState> {
        self.jobs.lock().expect("jobs lock").get(job).map(|r| r.state.clone())
    }

    pub fn job_meta(&self, job: &JobId) -> Option<JobMeta> {
        self.jobs.lock().expect("jobs lock").get(job).map(|r| r.meta.clone())
    }

    /// The job currently in flight for a session, if any.
    pub fn in_flight(&self, session_id: &str) -> Option<JobId> {
        self.in_flight.lock().expect("in-flight lock").get(session_id).cloned()
    }

    fn record(&self, station: &str, event: &str, detail: Option<String>, diagnostic: bool) {
        let Some(log) = &self.log else { return };
        let now = self.clock.now();
        let mut rec = if diagnostic {
            LogRecord::diagnostic(now, station, detail.clone().unwrap_or_default())
        } else {
            LogRecord::event(now, station, event)
        };
        if diagnostic {
            rec.event = event.into();
        } else if let Some(d) = detail {
            rec = rec.with_detail(d);
        }
        log.append_clamped(rec);
    }

    /// Dispatches a request. The capture inside `req` is dropped before this
    /// returns. Inline backends are finalized before returning; polling
    /// backends get a background poller.
    pub async fn submit(self: &Arc<Self>, req: GenerationRequest, code: PickupCode) -> Result<Submitted, PipelineError> {
        let session_id = req.session.session_id.clone();
        if self.in_flight(&session_id).is_some() {
            return Err(PipelineError::SessionBusy(session_id));
        }
        let meta = JobMeta {
            session: req.session.clone(),
            artwork_id: req.style.artwork_id.clone(),
            pose: req.pose.clone(),
            code,
        };
        let station = meta.session.station_id.clone();

        let backend = Arc::clone(&self.backend);
        let outcome = self.retry.run(|| backend.submit(&req)).await;
        drop(req);
        let submission = match outcome {
            Ok(s) => s,
            Err(e) => {
                let event = if e.is_retryable() || matches!(e, BackendError::RetriesExhausted { .. }) {
                    "job_submit_failed"
                } else {
                    "job_rejected"
                };
                self.record(&station, event, Some(e.to_string()), false);
                return Err(e.into());
            }
        };

        let job_id = submission.job_id.clone();
        {
            let mut jobs = self.jobs.lock().expect("jobs lock");
            if jobs.contains_key(&job_id) {
                return Err(PipelineError::DuplicateJobId(job_id));
            }
            jobs.insert(
                job_id.clone(),
                JobRecord { meta, state: JobState::Pending, lock: Arc::new(tokio::sync::Mutex::new(())) },
            );
        }
        self.in_flight.lock().expect("in-flight lock").insert(session_id, job_id.clone());
        self.record(&station, "job_submitted", Some(job_id.0.clone()), false);

        let finalized = match (submission.completion, self.backend.completion_mode()) {
            (Some(completion), _) => Some(self.finalize(&job_id, completion).await?),
            (None, CompletionMode::Polling { interval }) => {
                let this = Arc::clone(self);
                let job = job_id.clone();
                tokio::spawn(async move { this.poll_until_done(job, interval).await });
                None
            }
            (None, _) => None,
        };
        Ok(Submitted { job_id, finalized })
    }

    async fn poll_until_done(self: Arc<Self>, job: JobId, interval: std::time::Duration) {
        let mut transport_failures = 0;
        loop {
            tokio::time::sleep(interval).await;
            let completion = match self.backend.poll(&job).await {
                Ok(Some(c)) => c,
                Ok(None) => continue,
                Err(e) if e.is_retryable() && transport_failures + 1 < self.retry.attempts => {
                    transport_failures += 1;
                    continue;
                }
                Err(e) => Completion::Failed { reason: format!("polling failed: {e}") },
            };
            if let Err(e) = self.finalize(&job, completion).await {
                log::error!("finalizing polled job {job}: {e}");
            }
            return;
        }
    }

    /// Applies a completion. Safe under concurrent duplicate deliveries: the
    /// first one wins and later ones return the existing outcome.
    pub async fn finalize(&self, job_id: &JobId, completion: Completion) -> Result<Finalized, PipelineError> {
        let lock = {
            let jobs = self.jobs.lock().expect("jobs lock");
            match jobs.get(job_id) {
                Some(r) => Arc::clone(&r.lock),
                None => {
                    drop(jobs);
                    self.record("pipeline", "unknown_job", Some(job_id.0.clone()), true);
                    return Err(PipelineError::UnknownJob(job_id.clone()));
                }
            }
        };
        let _guard = lock.lock().await;
        let (meta, state) = {
            let jobs = self.jobs.lock().expect("jobs lock");
            let r = &jobs[job_id];
            (r.meta.clone(), r.state.clone())
        };
        let station = meta.session.station_id.clone();

        if state.is_terminal() {
            let result = match &state {
                JobState::Completed { result_id } => Some(self.load_result(result_id, &meta)?),
                _ => None,
            };
            self.record(&station, "duplicate_completion", Some(job_id.0.clone()), true);
            return Ok(Finalized { job_id: job_id.clone(), state, result, duplicate: true });
        }

        let (event, result) = match completion {
            Completion::Failed { reason } => (JobEvent::Fail { reason }, None),
            Completion::Completed { image_png } => match self.persist(&meta, &image_png) {
                Ok(result) => (JobEvent::Complete { result_id: result.result_id.clone() }, Some(result)),
                Err(reason) => (JobEvent::Fail { reason }, None),
            },
        };
        let next = state.apply(event).expect("pending job accepts a terminal event");
        {
            let mut jobs = self.jobs.lock().expect("jobs lock");
            jobs.get_mut(job_id).expect("job registered").state = next.clone();
        }
        {
            let mut in_flight = self.in_flight.lock().expect("in-flight lock");
            if in_flight.get(&meta.session.session_id) == Some(job_id) {
                in_flight.remove(&meta.session.session_id);
            }
        }
        match &next {
            JobState::Completed { result_id } => self.record(&station, "job_completed", Some(result_id.clone()), false),
            JobState::Failed { reason } => self.record(&station, "job_failed", Some(reason.clone()), false),
            JobState::Pending => unreachable!(),
        }
        Ok(Finalized { job_id: job_id.clone(), state: next, result, duplicate: false })
    }

    fn persist(&self, meta: &JobMeta, image_png: &[u8]) -> Result<GeneratedResult, String> {
        let raster = image::load_from_memory(image_png).map_err(|e| format!("generated image undecodable: {e}"))?;
        let outcome = postprocess(raster.to_rgba8(), &self.stages);
        if let Some(e) = &outcome.degraded {
            self.record(&meta.session.station_id, "postprocess_degraded", Some(e.to_string()), true);
        }
        let draft = ResultDraft {
            image_png: encode_png(&outcome.image),
            pose: meta.pose.clone(),
            artwork_id: meta.artwork_id.clone(),
            booth: meta.session.booth,
            code: meta.code.clone(),
            created_at: self.clock.now(),
        };
        let entry = self.store.persist_result(&draft).map_err(|e| format!("store: {e}"))?;
        Ok(GeneratedResult {
            result_id: entry.result_id,
            image_png: draft.image_png,
            pose: draft.pose,
            artwork_id: draft.artwork_id,
            booth: draft.booth,
            code: draft.code,
            created_at: entry.created_at,
        })
    }

    fn load_result(&self, result_id: &str, meta: &JobMeta) -> Result<GeneratedResult, StoreError> {
        let entry = self.store.entry(result_id).ok_or_else(|| StoreError::NotFound(result_id.into()))?;
        Ok(GeneratedResult {
            image_png: self.store.read_image(result_id)?,
            result_id: entry.result_id,
            pose: meta.pose.clone(),
            artwork_id: entry.artwork_id,
            booth: entry.booth,
            code: meta.code.clone(),
            created_at: entry.created_at,
        })
    }
}
