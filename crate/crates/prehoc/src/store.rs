//! Versioned bundle store on the local filesystem.
//!
//! ```text
//! <root>/<corpus>/v<N>/meta.json
//!                      config.json
//!                      doc_model.json
//!                      seg_model.json
//!                      lda.json
//!                      resources.json   (everything but the LDA model)
//!                      registry.json
//!                      baseline.json
//! ```
//!
//! A version directory is complete once visible: it is written under a
//! staging name and renamed into place. Published versions are never
//! rewritten.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Bundle, BundleMeta, PipelineError, ReadyBundle};

/// Environment variable naming the store root.
pub const STORE_ENV: &str = "PREHOC_STORE";
pub const DEFAULT_STORE: &str = "prehoc-store";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no bundle for corpus {0}")]
    NotFound(String),
    #[error("bundle {0} already exists")]
    AlreadyExists(String),
    #[error("invalid corpus name {0:?}: use letters, digits, '-' and '_'")]
    InvalidName(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Serialize, Deserialize)]
struct Baselines {
    doc: prehoc_core::tcruise::Baseline,
    seg: prehoc_core::tcruise::Baseline,
}

pub fn valid_corpus_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug)]
pub struct ModelStore {
    root: PathBuf,
    cache: RwLock<BTreeMap<(String, u32), Arc<ReadyBundle>>>,
    reserved: Mutex<BTreeSet<(String, u32)>>,
}

static STAGING: AtomicU64 = AtomicU64::new(0);

impl ModelStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root, cache: RwLock::new(BTreeMap::new()), reserved: Mutex::new(BTreeSet::new()) })
    }

    /// Root from `flag`, else `$PREHOC_STORE`, else `./prehoc-store`.
    pub fn resolve_root(flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(STORE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpora(&self) -> Vec<String> {
        let Ok(rd) = fs::read_dir(&self.root) else { return Vec::new() };
        let mut v: Vec<String> = rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| valid_corpus_name(n) && !self.versions(n).is_empty())
            .collect();
        v.sort();
        v
    }

    /// Published versions, ascending.
    pub fn versions(&self, corpus: &str) -> Vec<u32> {
        if !valid_corpus_name(corpus) {
            return Vec::new();
        }
        let Ok(rd) = fs::read_dir(self.root.join(corpus)) else { return Vec::new() };
        let mut v: Vec<u32> = rd
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter_map(|n| n.strip_prefix('v').and_then(|x| x.parse().ok()))
            .collect();
        v.sort_unstable();
        v
    }

    /// Reserves the next free version so concurrent trainers of one corpus
    /// never race for the same number.
    pub fn reserve_version(&self, corpus: &str) -> Result<u32, StoreError> {
        if !valid_corpus_name(corpus) {
            return Err(StoreError::InvalidName(corpus.into()));
        }
        let mut r = self.reserved.lock().expect("reservation lock");
        let on_disk = self.versions(corpus).last().copied().unwrap_or(0);
        let held = r.iter().filter(|(c, _)| c == corpus).map(|(_, v)| *v).max().unwrap_or(0);
        let v = on_disk.max(held) + 1;
        r.insert((corpus.to_string(), v));
        Ok(v)
    }

    /// Gives back a version reserved for a build that will not be published.
    pub fn release_reservation(&self, corpus: &str, version: u32) {
        self.reserved.lock().expect("reservation lock").remove(&(corpus.to_string(), version));
    }

    fn dir(&self, corpus: &str, version: u32) -> PathBuf {
        self.root.join(corpus).join(format!("v{version}"))
    }

    /// Writes `bundle` as version `bundle.meta.version`; an existing version
    /// is an error.
    pub fn publish(&self, bundle: &Bundle) -> Result<String, StoreError> {
        let result = self.publish_inner(bundle);
        self.release_reservation(&bundle.meta.corpus, bundle.meta.version);
        result
    }

    fn publish_inner(&self, bundle: &Bundle) -> Result<String, StoreError> {
        let corpus = &bundle.meta.corpus;
        if !valid_corpus_name(corpus) {
            return Err(StoreError::InvalidName(corpus.clone()));
        }
        let target = self.dir(corpus, bundle.meta.version);
        if target.exists() {
            return Err(StoreError::AlreadyExists(bundle.meta.id()));
        }
        let parent = self.root.join(corpus);
        fs::create_dir_all(&parent).map_err(io_err(&parent))?;
        let staging = parent.join(format!(
            ".staging-v{}-{}-{}",
            bundle.meta.version,
            std::process::id(),
            STAGING.fetch_add(1, Ordering::Relaxed)
        ));
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        let written = write_bundle(&staging, bundle).and_then(|_| {
            if target.exists() {
                return Err(StoreError::AlreadyExists(bundle.meta.id()));
            }
            fs::rename(&staging, &target).map_err(io_err(&target))
        });
        if written.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        written.map(|_| bundle.meta.id())
    }

    pub fn load(&self, corpus: &str, version: u32) -> Result<Bundle, StoreError> {
        let dir = self.dir(corpus, version);
        if !valid_corpus_name(corpus) || !dir.is_dir() {
            return Err(StoreError::NotFound(format!("{corpus}/v{version}")));
        }
        read_bundle(&dir)
    }

    /// Latest published version of `corpus`, loaded once and shared.
    pub fn get(&self, corpus: &str) -> Result<Arc<ReadyBundle>, StoreError> {
        let version = *self.versions(corpus).last().ok_or_else(|| StoreError::NotFound(corpus.into()))?;
        self.get_version(corpus, version)
    }

    pub fn get_version(&self, corpus: &str, version: u32) -> Result<Arc<ReadyBundle>, StoreError> {
        let key = (corpus.to_string(), version);
        if let Some(b) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(b.clone());
        }
        let ready = Arc::new(ReadyBundle::new(self.load(corpus, version)?)?);
        let mut cache = self.cache.write().expect("cache lock");
        Ok(cache.entry(key).or_insert(ready).clone())
    }

    pub fn list(&self) -> Vec<BundleMeta> {
        let mut out = Vec::new();
        for c in self.corpora() {
            for v in self.versions(&c) {
                let path = self.dir(&c, v).join("meta.json");
                if let Ok(m) = read_json::<BundleMeta>(&path) {
                    out.push(m);
                }
            }
        }
        out
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), StoreError> {
    let bytes = serde_json::to_vec_pretty(v).map_err(|source| StoreError::Json { path: path.into(), source })?;
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path: path.into(), source })
}

fn write_bundle(dir: &Path, b: &Bundle) -> Result<(), StoreError> {
    write_json(&dir.join("meta.json"), &b.meta)?;
    write_json(&dir.join("config.json"), &b.config)?;
    write_json(&dir.join("doc_model.json"), &b.doc_model)?;
    write_json(&dir.join("seg_model.json"), &b.seg_model)?;
    write_json(&dir.join("lda.json"), &b.resources.lda)?;
    let path = dir.join("resources.json");
    let mut res = serde_json::to_value(&b.resources).map_err(|source| StoreError::Json { path: path.clone(), source })?;
    if let Some(o) = res.as_object_mut() {
        o.remove("lda");
    }
    write_json(&path, &res)?;
    write_json(&dir.join("registry.json"), &b.registry)?;
    write_json(&dir.join("baseline.json"), &Baselines { doc: b.doc_baseline.clone(), seg: b.seg_baseline.clone() })
}

fn read_bundle(dir: &Path) -> Result<Bundle, StoreError> {
    let path = dir.join("resources.json");
    let mut res: serde_json::Value = read_json(&path)?;
    let lda: serde_json::Value = read_json(&dir.join("lda.json"))?;
    if let Some(o) = res.as_object_mut() {
        o.insert("lda".into(), lda);
    }
    let resources = serde_json::from_value(res).map_err(|source| StoreError::Json { path, source })?;
    let baselines: Baselines = read_json(&dir.join("baseline.json"))?;
    Ok(Bundle {
        meta: read_json(&dir.join("meta.json"))?,
        config: read_json(&dir.join("config.json"))?,
        doc_model: read_json(&dir.join("doc_model.json"))?,
        seg_model: read_json(&dir.join("seg_model.json"))?,
        resources,
        registry: read_json(&dir.join("registry.json"))?,
        doc_baseline: baselines.doc,
        seg_baseline: baselines.seg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_names() {
        assert!(valid_corpus_name("laptops-2024_v"));
        assert!(!valid_corpus_name("../etc"));
        assert!(!valid_corpus_name(""));
    }

    #[test]
    fn versions_are_reserved_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let s = ModelStore::open(dir.path()).unwrap();
        assert_eq!(s.reserve_version("c").unwrap(), 1);
        assert_eq!(s.reserve_version("c").unwrap(), 2);
        s.release_reservation("c", 1);
        s.release_reservation("c", 2);
        assert_eq!(s.reserve_version("c").unwrap(), 1);
        assert!(matches!(s.get("c"), Err(StoreError::NotFound(_))));
        assert!(matches!(s.reserve_version("a/b"), Err(StoreError::InvalidName(_))));
    }
}
