//! Append-only interaction log written by a background thread.
//!
//! Producers never block on disk. The in-memory queue is bounded; on
//! overflow the oldest diagnostic record is dropped first, then the oldest
//! record of any kind, and every drop is counted.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Event,
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub timestamp: Timestamp,
    pub station_id: String,
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    pub level: LogLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl LogRecord {
    pub fn event(timestamp: Timestamp, station_id: impl Into<String>, event: impl Into<String>) -> Self {
        Self {
            timestamp,
            station_id: station_id.into(),
            event: event.into(),
            phase: None,
            level: LogLevel::Event,
            detail: None,
        }
    }

    pub fn diagnostic(timestamp: Timestamp, station_id: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            timestamp,
            station_id: station_id.into(),
            event: "diagnostic".into(),
            phase: None,
            level: LogLevel::Diagnostic,
            detail: Some(detail.into()),
        }
    }

    pub fn with_phase(mut self, phase: impl Into<String>) -> Self {
        self.phase = Some(phase.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log i/o at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("station {station} timestamp went backwards: {previous} then {given}")]
    NonMonotonic { station: String, previous: Timestamp, given: Timestamp },
    #[error("log line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Default)]
struct Queue {
    pending: VecDeque<LogRecord>,
    /// Records taken by the writer but not yet on disk.
    in_flight: usize,
    last_by_station: HashMap<String, Timestamp>,
    dropped: u64,
    written: u64,
    paused: bool,
    shutdown: bool,
    write_error: Option<String>,
}

struct Shared {
    queue: Mutex<Queue>,
    wake_writer: Condvar,
    drained: Condvar,
}

pub struct InteractionLog {
    path: PathBuf,
    capacity: usize,
    shared: Arc<Shared>,
    writer: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for InteractionLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InteractionLog").field("path", &self.path).field("capacity", &self.capacity).finish()
    }
}

impl InteractionLog {
    /// Opens `path` for appending and starts the writer thread. At most
    /// `capacity` records wait in memory.
    pub fn open(path: impl Into<PathBuf>, capacity: usize) -> Result<Self, LogError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| LogError::Io { path: parent.into(), source })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError::Io { path: path.clone(), source })?;
        let shared = Arc::new(Shared { queue: Mutex::new(Queue::default()), wake_writer: Condvar::new(), drained: Condvar::new() });
        let writer = {
            let shared = Arc::clone(&shared);
            std::thread::Builder::new()
                .name("interaction-log".into())
                .spawn(move || write_loop(file, &shared))
                .map_err(|source| LogError::Io { path: path.clone(), source })?
        };
        Ok(Self { path, capacity: capacity.max(1), shared, writer: Some(writer) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Queues a record. Rejects timestamps earlier than the station's last.
    pub fn append(&self, record: LogRecord) -> Result<(), LogError> {
        self.enqueue(record, false)
    }

    /// Queues a system-originated record, raising its timestamp to the
    /// station's last one instead of rejecting a regression caused by racing
    /// writers.
    pub fn append_clamped(&self, record: LogRecord) {
        self.enqueue(record, true).expect("clamped append cannot regress");
    }

    fn enqueue(&self, mut record: LogRecord, clamp: bool) -> Result<(), LogError> {
        let mut q = self.shared.queue.lock().expect("log queue");
        if let Some(&previous) = q.last_by_station.get(&record.station_id) {
            if clamp {
                record.timestamp = record.timestamp.max(previous);
            } else if record.timestamp < previous {
                return Err(LogError::NonMonotonic { station: record.station_id, previous, given: record.timestamp });
            }
        }
        q.last_by_station.insert(record.station_id.clone(), record.timestamp);
        if q.pending.len() >= self.capacity {
            let victim = q.pending.iter().position(|r| r.level == LogLevel::Diagnostic).unwrap_or(0);
            q.pending.remove(victim);
            q.dropped += 1;
        }
        q.pending.push_back(record);
        drop(q);
        self.shared.wake_writer.notify_one();
        Ok(())
    }

    pub fn dropped(&self) -> u64 {
        self.shared.queue.lock().expect("log queue").dropped
    }

    pub fn written(&self) -> u64 {
        self.shared.queue.lock().expect("log queue").written
    }

    /// Holds the writer so tests can fill the queue deterministically.
    pub fn set_paused(&self, paused: bool) {
        self.shared.queue.lock().expect("log queue").paused = paused;
        self.shared.wake_writer.notify_one();
    }

    /// Blocks until every queued record is on disk.
    pub fn flush(&self) -> Result<(), LogError> {
        let mut q = self.shared.queue.lock().expect("log queue");
        while (!q.pending.is_empty() && !q.paused) || q.in_flight > 0 {
            q = self.shared.drained.wait(q).expect("log queue");
        }
        match q.write_error.take() {
            Some(reason) => Err(LogError::Io { path: self.path.clone(), source: std::io::Error::other(reason) }),
            None => Ok(()),
        }
    }

    /// Reads back a log file.
    pub fn read_all(path: &Path) -> Result<Vec<LogRecord>, LogError> {
        let file = File::open(path).map_err(|source| LogError::Io { path: path.into(), source })?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| LogError::Io { path: path.into(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| LogError::Parse { line: i + 1, reason: e.to_string() })?);
        }
        Ok(out)
    }
}

impl Drop for InteractionLog {
    fn drop(&mut self) {
        {
            let mut q = self.shared.queue.lock().expect("log queue");
            q.shutdown = true;
            q.paused = false;
        }
        self.shared.wake_writer.notify_one();
        if let Some(handle) = self.writer.take() {
            let _ = handle.join();
        }
    }
}

fn write_loop(mut file: File, shared: &Shared) {
    loop {
        let batch: Vec<LogRecord> = {
            let mut q = shared.queue.lock().expect("log queue");
            while (q.pending.is_empty() || q.paused) && !q.shutdown {
                q = shared.wake_writer.wait(q).expect("log queue");
            }
            if q.pending.is_empty() && q.shutdown {
                return;
            }
            let batch: Vec<LogRecord> = q.pending.drain(..).collect();
            q.in_flight = batch.len();
            batch
        };
        let mut buf = Vec::new();
        for record in &batch {
            serde_json::to_writer(&mut buf, record).expect("log record serializes");
            buf.push(b'\n');
        }
        let result = file.write_all(&buf).and_then(|()| file.sync_data());
        let mut q = shared.queue.lock().expect("log queue");
        q.in_flight = 0;
        match result {
            Ok(()) => q.written += batch.len() as u64,
            Err(e) => q.write_error = Some(e.to_string()),
        }
        drop(q);
        shared.drained.notify_all();
    }
}
