//! Two-word pickup codes linking a visitor to their generated image.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;

/// Random draws attempted before falling back to a linear scan.
const RANDOM_DRAWS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PickupCode {
    pub words: (String, String),
    pub issued_at: Timestamp,
}

impl PickupCode {
    pub fn new(a: impl Into<String>, b: impl Into<String>, issued_at: Timestamp) -> Self {
        Self { words: (a.into(), b.into()), issued_at }
    }

    /// The text shown to the visitor, e.g. `kuu-otter`.
    pub fn text(&self) -> String {
        format!("{}-{}", self.words.0, self.words.1)
    }
}

impl fmt::Display for PickupCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.words.0, self.words.1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CodeError {
    #[error("all {capacity} pickup codes have been issued; deploy larger wordlists")]
    Exhausted { capacity: usize },
    #[error("wordlist {path}: {reason}")]
    Wordlist { path: String, reason: String },
}

/// The two curated word lists codes are drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wordlists {
    first: Vec<String>,
    second: Vec<String>,
}

impl Wordlists {
    pub fn new(first: Vec<String>, second: Vec<String>) -> Result<Self, CodeError> {
        check_list(&first, "first")?;
        check_list(&second, "second")?;
        Ok(Self { first, second })
    }

    /// Reads two UTF-8 files with one word per line. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn load(first: &Path, second: &Path) -> Result<Self, CodeError> {
        let read = |p: &Path| -> Result<Vec<String>, CodeError> {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CodeError::Wordlist { path: p.display().to_string(), reason: e.to_string() })?;
            let words: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned)
                .collect();
            check_list(&words, &p.display().to_string())?;
            Ok(words)
        };
        Self::new(read(first)?, read(second)?)
    }

    pub fn capacity(&self) -> usize {
        self.first.len() * self.second.len()
    }

    fn pair(&self, index: usize) -> (&str, &str) {
        let (i, j) = (index / self.second.len(), index % self.second.len());
        (&self.first[i], &self.second[j])
    }
}

fn check_list(words: &[String], name: &str) -> Result<(), CodeError> {
    let err = |reason: String| CodeError::Wordlist { path: name.to_string(), reason };
    if words.is_empty() {
        return Err(err("list is empty".into()));
    }
    let mut seen = HashSet::new();
    for w in words {
        if w.is_empty() || w.chars().any(|c| c.is_whitespace() || c == '-') {
            return Err(err(format!("`{w}` must be a single word without hyphens")));
        }
        if !seen.insert(w) {
            return Err(err(format!("`{w}` is listed twice")));
        }
    }
    Ok(())
}

/// Issues codes that never repeat.
#[derive(Debug, Clone)]
pub struct CodeGenerator {
    lists: Arc<Wordlists>,
    issued: HashSet<usize>,
    rng: ChaCha8Rng,
}

impl CodeGenerator {
    pub fn new(lists: Wordlists, seed: u64) -> Self {
        Self { lists: Arc::new(lists), issued: HashSet::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn capacity(&self) -> usize {
        self.lists.capacity()
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }

    /// Marks as issued every code whose text satisfies `taken`, e.g. codes
    /// already present in a store from an earlier run.
    pub fn reserve_where(&mut self, mut taken: impl FnMut(&str) -> bool) -> usize {
        let mut reserved = 0;
        for index in 0..self.capacity() {
            let (a, b) = self.lists.pair(index);
            if taken(&format!("{a}-{b}")) && self.issued.insert(index) {
                reserved += 1;
            }
        }
        reserved
    }

    pub fn issue(&mut self, now: Timestamp) -> Result<PickupCode, CodeError> {
        let capacity = self.capacity();
        if self.issued.len() >= capacity {
            return Err(CodeError::Exhausted { capacity });
        }
        let mut index = None;
        for _ in 0..RANDOM_DRAWS {
            let candidate = self.rng.random_range(0..capacity);
            if !self.issued.contains(&candidate) {
                index = Some(candidate);
                break;
            }
        }
        let index = match index {
            Some(i) => i,
            None => {
                let start = self.rng.random_range(0..capacity);
                (0..capacity)
                    .map(|k| (start + k) % capacity)
                    .find(|i| !self.issued.contains(i))
                    .expect("a free slot exists below capacity")
            }
        };
        self.issued.insert(index);
        let (a, b) = self.lists.pair(index);
        Ok(PickupCode::new(a, b, now))
    }
}

/// Deployment-wide, thread-safe code issuer shared by all stations.
#[derive(Debug, Clone)]
pub struct CodeRegistry {
    inner: Arc<Mutex<CodeGenerator>>,
}

impl CodeRegistry {
    pub fn new(generator: CodeGenerator) -> Self {
        Self { inner: Arc::new(Mutex::new(generator)) }
    }

    pub fn issue(&self, now: Timestamp) -> Result<PickupCode, CodeError> {
        self.inner.lock().expect("code registry poisoned").issue(now)
    }

    pub fn issued_count(&self) -> usize {
        self.inner.lock().expect("code registry poisoned").issued_count()
    }
}
