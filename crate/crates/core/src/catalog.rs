//! Source-artwork catalog.
//!
//! The catalog is a versioned JSON manifest listing artworks with image paths
//! relative to the manifest's directory. Only entries marked
//! `safety_approved` are ever shown to visitors.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pose::DynamismRating;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collection {
    FinnishGoldenAge,
    Wikiart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtworkEntry {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub collection: Collection,
    pub image_path: PathBuf,
    pub caption_prompt: String,
    pub subject_count: u32,
    pub dynamism: DynamismRating,
    pub safety_approved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    manifest_version: String,
    entries: Vec<ArtworkEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    manifest_version: String,
    entries: Vec<ArtworkEntry>,
    base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    DuplicateIds(Vec<String>),
    EmptyId { index: usize },
    EmptyCaption { id: String },
    MissingImage { id: String, path: PathBuf },
    UndecodableImage { id: String, path: PathBuf, reason: String },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::DuplicateIds(ids) => write!(f, "duplicate ids: {}", ids.join(", ")),
            ValidationIssue::EmptyId { index } => write!(f, "entry #{index} has an empty id"),
            ValidationIssue::EmptyCaption { id } => write!(f, "`{id}` has an empty caption_prompt"),
            ValidationIssue::MissingImage { id, path } => write!(f, "`{id}`: image {} not found", path.display()),
            ValidationIssue::UndecodableImage { id, path, reason } => {
                write!(f, "`{id}`: image {} does not decode: {reason}", path.display())
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationIssue>),
    #[error("catalog has no safety-approved entries")]
    NoServableEntries,
    #[error("unknown or unservable artwork `{0}`")]
    UnknownArtwork(String),
    #[error("cannot read image for `{id}`: {source}")]
    Storage { id: String, source: std::io::Error },
}

/// Style-conditioning input: the artwork image and its caption, untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleRef {
    pub artwork_id: String,
    pub image: Vec<u8>,
    pub caption: String,
}

/// Loads and validates a manifest. Image paths resolve against the
/// manifest's directory.
pub fn load_catalog(manifest: &Path) -> Result<Catalog, CatalogError> {
    let text = fs::read_to_string(manifest).map_err(|source| CatalogError::Io { path: manifest.into(), source })?;
    let parsed: Manifest = serde_json::from_str(&text)?;
    let base_dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    Catalog::from_parts(parsed.manifest_version, parsed.entries, base_dir)
}

impl Catalog {
    pub fn from_parts(
        manifest_version: String,
        entries: Vec<ArtworkEntry>,
        base_dir: PathBuf,
    ) -> Result<Self, CatalogError> {
        let catalog = Self { manifest_version, entries, base_dir };
        let issues = catalog.validate();
        if !issues.is_empty() {
            return Err(CatalogError::Validation(issues));
        }
        if catalog.servable().next().is_none() {
            return Err(CatalogError::NoServableEntries);
        }
        Ok(catalog)
    }

    fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();

        let mut seen = HashSet::new();
        let mut dupes = Vec::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) && !dupes.contains(&e.id) {
                dupes.push(e.id.clone());
            }
        }
        if !dupes.is_empty() {
            issues.push(ValidationIssue::DuplicateIds(dupes));
        }

        for (index, e) in self.entries.iter().enumerate() {
            if e.id.trim().is_empty() {
                issues.push(ValidationIssue::EmptyId { index });
            }
            if e.caption_prompt.trim().is_empty() {
                issues.push(ValidationIssue::EmptyCaption { id: e.id.clone() });
            }
            let path = self.image_path(e);
            match fs::read(&path) {
                Err(_) => issues.push(ValidationIssue::MissingImage { id: e.id.clone(), path }),
                Ok(bytes) => {
                    if let Err(err) = image::load_from_memory(&bytes) {
                        issues.push(ValidationIssue::UndecodableImage {
                            id: e.id.clone(),
                            path,
                            reason: err.to_string(),
                        });
                    }
                }
            }
        }
        issues
    }

    pub fn manifest_version(&self) -> &str {
        &self.manifest_version
    }

    /// Every entry, including ones not approved for display.
    pub fn entries(&self) -> &[ArtworkEntry] {
        &self.entries
    }

    pub fn servable(&self) -> impl Iterator<Item = &ArtworkEntry> {
        self.entries.iter().filter(|e| e.safety_approved)
    }

    pub fn servable_entry(&self, id: &str) -> Option<&ArtworkEntry> {
        self.servable().find(|e| e.id == id)
    }

    pub fn image_path(&self, entry: &ArtworkEntry) -> PathBuf {
        self.base_dir.join(&entry.image_path)
    }

    pub fn count_by_collection(&self) -> BTreeMap<Collection, usize> {
        let mut counts = BTreeMap::new();
        for e in self.servable() {
            *counts.entry(e.collection).or_insert(0) += 1;
        }
        counts
    }

    /// Servable ids in a seed-determined random order.
    pub fn shuffled_view(&self, seed: u64) -> Vec<String> {
        let mut ids: Vec<String> = self.servable().map(|e| e.id.clone()).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        ids
    }

    pub fn style_ref(&self, entry: &ArtworkEntry) -> Result<StyleRef, CatalogError> {
        if !entry.safety_approved {
            return Err(CatalogError::UnknownArtwork(entry.id.clone()));
        }
        let image = fs::read(self.image_path(entry))
            .map_err(|source| CatalogError::Storage { id: entry.id.clone(), source })?;
        Ok(StyleRef { artwork_id: entry.id.clone(), image, caption: entry.caption_prompt.clone() })
    }
}

/// Produces a caption for an artwork image, e.g. a client for an external
/// image-to-prompt service.
pub trait Captioner {
    fn caption(&self, image: &[u8]) -> Result<String, String>;
}

/// Rewrites every entry's `caption_prompt` using `captioner` and saves the
/// manifest in place. Returns the number of captions that changed.
pub fn recaption_manifest(manifest: &Path, captioner: &dyn Captioner) -> Result<usize, CatalogError> {
    let text = fs::read_to_string(manifest).map_err(|source| CatalogError::Io { path: manifest.into(), source })?;
    let mut parsed: Manifest = serde_json::from_str(&text)?;
    let base_dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut changed = 0;
    for entry in &mut parsed.entries {
        let bytes = fs::read(base_dir.join(&entry.image_path))
            .map_err(|source| CatalogError::Storage { id: entry.id.clone(), source })?;
        let caption = captioner.caption(&bytes).map_err(|reason| {
            CatalogError::Validation(vec![ValidationIssue::UndecodableImage {
                id: entry.id.clone(),
                path: entry.image_path.clone(),
                reason,
            }])
        })?;
        if caption != entry.caption_prompt {
            entry.caption_prompt = caption;
            changed += 1;
        }
    }
    let out = serde_json::to_string_pretty(&parsed)?;
    fs::write(manifest, out + "\n").map_err(|source| CatalogError::Io { path: manifest.into(), source })?;
    Ok(changed)
}
