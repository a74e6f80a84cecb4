//! Result store and viewer feed.
//!
//! Layout under the store root:
//!
//! ```text
//! results/<result_id>/image.png
//! results/<result_id>/pose.json
//! feed.jsonl              one FeedEntry per line, append-only
//! logs/interactions.jsonl
//! ```
//!
//! A result becomes visible only once its line lands in `feed.jsonl`, which
//! happens after both files are synced. Anything under `results/` without a
//! feed line is an orphan and is removed on [`FsStore::open`]. The store
//! never receives capture bytes and keeps only a keyed hash of pickup codes.

mod log;

pub use log::{InteractionLog, LogError, LogLevel, LogRecord};

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use tokio::sync::watch;

use crate::clock::Timestamp;
use crate::pose::{serialize_pose, PoseSkeleton};
use crate::session::PickupCode;
use crate::Booth;

const FEED_FILE: &str = "feed.jsonl";
const RESULTS_DIR: &str = "results";
const IMAGE_FILE: &str = "image.png";
const POSE_FILE: &str = "pose.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub result_id: String,
    pub created_at: Timestamp,
    pub booth: Booth,
    pub artwork_id: String,
    /// Path of the PNG relative to the store root.
    pub image: String,
    /// Path of the pose document relative to the store root.
    pub pose: String,
    pub code_hash: String,
}

/// Everything needed to persist a finished generation.
#[derive(Debug, Clone)]
pub struct ResultDraft {
    pub image_png: Vec<u8>,
    pub pose: PoseSkeleton,
    pub artwork_id: String,
    pub booth: Booth,
    pub code: PickupCode,
    pub created_at: Timestamp,
}

/// Position in the feed a reader has consumed up to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FeedCursor {
    #[default]
    Start,
    /// Number of entries already seen.
    Count(usize),
    /// Id of the last entry seen.
    After(String),
}

impl FromStr for FeedCursor {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(if s.is_empty() {
            FeedCursor::Start
        } else if let Ok(n) = s.parse::<usize>() {
            FeedCursor::Count(n)
        } else {
            FeedCursor::After(s.to_string())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeedPage {
    pub entries: Vec<FeedEntry>,
    pub new_count: usize,
    /// Pass back as the next cursor; counts all entries regardless of filter.
    pub next_cursor: usize,
    /// The cursor was not recognized and the page restarts from the beginning.
    pub resync: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store i/o at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt feed line {line}: {reason}")]
    CorruptFeed { line: usize, reason: String },
    #[error("injected failure: {0}")]
    Injected(&'static str),
    #[error("unknown result `{0}`")]
    NotFound(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Test hook simulating a crash between writing files and appending the feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailPoint {
    AfterFilesBeforeFeed,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct RecoveryReport {
    pub entries: usize,
    pub orphans_removed: Vec<String>,
    pub truncated_tail: bool,
}

pub struct FsStore {
    root: PathBuf,
    secret: Vec<u8>,
    feed: RwLock<Vec<FeedEntry>>,
    writer: Mutex<()>,
    appended: watch::Sender<usize>,
    fail_point: Mutex<Option<FailPoint>>,
}

impl std::fmt::Debug for FsStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FsStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl FsStore {
    /// Opens (or creates) a store, recovering from any interrupted write.
    /// `secret` keys the pickup-code hash.
    pub fn open(root: impl Into<PathBuf>, secret: &[u8]) -> Result<(Self, RecoveryReport), StoreError> {
        let root = root.into();
        let results = root.join(RESULTS_DIR);
        fs::create_dir_all(&results).map_err(io_err(&results))?;

        let feed_path = root.join(FEED_FILE);
        let mut report = RecoveryReport::default();
        let mut entries = Vec::new();
        if feed_path.exists() {
            let text = fs::read_to_string(&feed_path).map_err(io_err(&feed_path))?;
            let lines: Vec<&str> = text.split_inclusive('\n').collect();
            for (i, raw) in lines.iter().enumerate() {
                let complete = raw.ends_with('\n');
                match serde_json::from_str::<FeedEntry>(raw.trim_end()) {
                    Ok(entry) if complete => entries.push(entry),
                    _ if i + 1 == lines.len() => report.truncated_tail = true,
                    Ok(_) => unreachable!("only the last line can lack a newline"),
                    Err(e) => return Err(StoreError::CorruptFeed { line: i + 1, reason: e.to_string() }),
                }
            }
            if report.truncated_tail {
                let mut kept = String::new();
                for e in &entries {
                    kept.push_str(&serde_json::to_string(e).expect("feed entry serializes"));
                    kept.push('\n');
                }
                write_synced(&feed_path, kept.as_bytes())?;
            }
        }

        for dir in fs::read_dir(&results).map_err(io_err(&results))? {
            let dir = dir.map_err(io_err(&results))?;
            let name = dir.file_name().to_string_lossy().into_owned();
            if !entries.iter().any(|e| e.result_id == name) {
                let path = dir.path();
                if path.is_dir() {
                    fs::remove_dir_all(&path).map_err(io_err(&path))?;
                } else {
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
                report.orphans_removed.push(name);
            }
        }
        report.entries = entries.len();

        let (appended, _) = watch::channel(entries.len());
        let store = Self {
            root,
            secret: secret.to_vec(),
            feed: RwLock::new(entries),
            writer: Mutex::new(()),
            appended,
            fail_point: Mutex::new(None),
        };
        Ok((store, report))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_fail_point(&self, point: Option<FailPoint>) {
        *self.fail_point.lock().expect("fail point lock") = point;
    }

    /// Keyed one-way hash of a pickup code's text.
    pub fn code_hash(&self, code_text: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.secret).expect("hmac accepts any key length");
        mac.update(code_text.as_bytes());
        hex::encode(mac.finalize().into_bytes())
    }

    /// Writes image, pose and feed entry. The entry is visible to readers
    /// only after both files are durable.
    pub fn persist_result(&self, draft: &ResultDraft) -> Result<FeedEntry, StoreError> {
        let _guard = self.writer.lock().expect("store writer lock");
        let (seq, last_created) = {
            let feed = self.feed.read().expect("feed lock");
            (feed.len() + 1, feed.last().map(|e| e.created_at))
        };
        let result_id = format!("r{seq:06}");
        let dir = self.root.join(RESULTS_DIR).join(&result_id);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_synced(&dir.join(IMAGE_FILE), &draft.image_png)?;
        write_synced(&dir.join(POSE_FILE), serialize_pose(&draft.pose).as_bytes())?;
        sync_dir(&dir)?;

        if *self.fail_point.lock().expect("fail point lock") == Some(FailPoint::AfterFilesBeforeFeed) {
            return Err(StoreError::Injected("crash between result files and feed append"));
        }

        let created_at = last_created.map_or(draft.created_at, |last| last.max(draft.created_at));
        let entry = FeedEntry {
            result_id: result_id.clone(),
            created_at,
            booth: draft.booth,
            artwork_id: draft.artwork_id.clone(),
            image: format!("{RESULTS_DIR}/{result_id}/{IMAGE_FILE}"),
            pose: format!("{RESULTS_DIR}/{result_id}/{POSE_FILE}"),
            code_hash: self.code_hash(&draft.code.text()),
        };
        let feed_path = self.root.join(FEED_FILE);
        let mut line = serde_json::to_string(&entry).expect("feed entry serializes");
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&feed_path).map_err(io_err(&feed_path))?;
        file.write_all(line.as_bytes()).map_err(io_err(&feed_path))?;
        file.sync_data().map_err(io_err(&feed_path))?;

        let len = {
            let mut feed = self.feed.write().expect("feed lock");
            feed.push(entry.clone());
            feed.len()
        };
        self.appended.send_replace(len);
        Ok(entry)
    }

    /// Entries after `cursor`, optionally restricted to one booth.
    pub fn feed_since(&self, cursor: &FeedCursor, booth: Option<Booth>) -> FeedPage {
        let feed = self.feed.read().expect("feed lock");
        let (start, resync) = match cursor {
            FeedCursor::Start => (0, false),
            FeedCursor::Count(n) if *n <= feed.len() => (*n, false),
            FeedCursor::Count(_) => (0, true),
            FeedCursor::After(id) => match feed.iter().position(|e| &e.result_id == id) {
                Some(i) => (i + 1, false),
                None => (0, true),
            },
        };
        let entries: Vec<FeedEntry> =
            feed[start..].iter().filter(|e| booth.is_none_or(|b| e.booth == b)).cloned().collect();
        FeedPage { new_count: entries.len(), entries, next_cursor: feed.len(), resync }
    }

    pub fn len(&self) -> usize {
        self.feed.read().expect("feed lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Watches the feed length; changes on every append.
    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.appended.subscribe()
    }

    pub fn entry(&self, result_id: &str) -> Option<FeedEntry> {
        self.feed.read().expect("feed lock").iter().find(|e| e.result_id == result_id).cloned()
    }

    /// The result a pickup code redeems, if its generation finished.
    pub fn find_by_code(&self, code_text: &str) -> Option<FeedEntry> {
        let hash = self.code_hash(code_text);
        self.feed.read().expect("feed lock").iter().find(|e| e.code_hash == hash).cloned()
    }

    /// Every code hash in the feed, for re-reserving codes after a restart.
    pub fn code_hashes(&self) -> std::collections::HashSet<String> {
        self.feed.read().expect("feed lock").iter().map(|e| e.code_hash.clone()).collect()
    }

    pub fn read_image(&self, result_id: &str) -> Result<Vec<u8>, StoreError> {
        let entry = self.entry(result_id).ok_or_else(|| StoreError::NotFound(result_id.into()))?;
        let path = self.root.join(entry.image);
        fs::read(&path).map_err(io_err(&path))
    }

    pub fn read_pose(&self, result_id: &str) -> Result<String, StoreError> {
        let entry = self.entry(result_id).ok_or_else(|| StoreError::NotFound(result_id.into()))?;
        let path = self.root.join(entry.pose);
        fs::read_to_string(&path).map_err(io_err(&path))
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn sync_dir(dir: &Path) -> Result<(), StoreError> {
    #[cfg(unix)]
    File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))?;
    Ok(())
}
