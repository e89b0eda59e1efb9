//! A review session: the result files, manifests and static assets named in
//! `<dir>/session.json`, loaded once and never modified.
//!
//! ```json
//! {
//!   "retrievals": [{"label": "mel", "path": "retrieval-mel.jsonl"}],
//!   "clusters": "clusters.jsonl",
//!   "manifests": ["generated.jsonl", "train.jsonl"],
//!   "static_dir": "ui"
//! }
//! ```
//!
//! Relative paths are resolved against the session directory.

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use echotrace_core::corpus::{ClipId, CorpusManifest};
use echotrace_core::dedup::{self, ClusterReport};
use echotrace_core::retrieval::{self, RetrievalResult};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SESSION_FILE: &str = "session.json";
pub const VERDICT_LOG: &str = "verdicts.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalRef {
    /// Name shown to reviewers, e.g. `mel` or `clap`. Unique per session.
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub retrievals: Vec<RetrievalRef>,
    #[serde(default)]
    pub clusters: Option<PathBuf>,
    pub manifests: Vec<PathBuf>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub label: String,
    pub raw: f64,
    pub bias: f64,
    pub normalized: f64,
}

/// One retrieved (query, reference) pair. The same pair retrieved under
/// several descriptors appears once, with one score per descriptor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairItem {
    pub position: usize,
    pub query: ClipId,
    pub reference: ClipId,
    pub scores: Vec<PairScore>,
}

#[derive(Debug, Clone)]
pub struct LoadedRetrieval {
    pub label: String,
    pub result: RetrievalResult,
}

#[derive(Debug)]
pub struct Session {
    pub dir: PathBuf,
    pub spec: SessionSpec,
    pub retrievals: Vec<LoadedRetrieval>,
    pub clusters: Option<ClusterReport>,
    /// Work queue: pairs of the first retrieval by descending normalized
    /// score, then pairs only found by later retrievals, in their order.
    pub pairs: Vec<PairItem>,
    clips: HashMap<ClipId, PathBuf>,
    pair_index: HashMap<(ClipId, ClipId), usize>,
}

impl Session {
    pub fn open(dir: &Path) -> Result<Session> {
        let spec_path = dir.join(SESSION_FILE);
        if !spec_path.is_file() {
            return Err(Error::MissingFiles(vec![spec_path]));
        }
        let text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
        let spec: SessionSpec = serde_json::from_str(&text)
            .map_err(|e| Error::Session(format!("{}: {e}", spec_path.display())))?;
        Session::from_spec(dir, spec)
    }

    pub fn from_spec(dir: &Path, spec: SessionSpec) -> Result<Session> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };

        let mut missing = Vec::new();
        let mut check = |p: PathBuf, want_dir: bool| {
            let ok = if want_dir { p.is_dir() } else { p.is_file() };
            if !ok {
                missing.push(p);
            }
        };
        for r in &spec.retrievals {
            check(resolve(&r.path), false);
        }
        if let Some(c) = &spec.clusters {
            check(resolve(c), false);
        }
        for m in &spec.manifests {
            check(resolve(m), false);
        }
        if let Some(s) = &spec.static_dir {
            check(resolve(s), true);
        }
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        if spec.retrievals.is_empty() && spec.clusters.is_none() {
            return Err(Error::Session("needs at least one retrieval result or a cluster report".into()));
        }
        if spec.manifests.is_empty() {
            return Err(Error::Session("needs at least one corpus manifest".into()));
        }

        let mut retrievals: Vec<LoadedRetrieval> = Vec::new();
        for r in &spec.retrievals {
            if retrievals.iter().any(|x| x.label == r.label) {
                return Err(Error::Session(format!("retrieval label {:?} is used twice", r.label)));
            }
            let path = resolve(&r.path);
            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            retrievals.push(LoadedRetrieval {
                label: r.label.clone(),
                result: retrieval::read_jsonl(BufReader::new(f))?,
            });
        }
        let clusters = match &spec.clusters {
            Some(c) => {
                let path = resolve(c);
                let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                Some(dedup::read_jsonl(BufReader::new(f))?)
            }
            None => None,
        };

        let mut clips: HashMap<ClipId, PathBuf> = HashMap::new();
        for m in &spec.manifests {
            let manifest = CorpusManifest::load(&resolve(m))?;
            for e in manifest.entries {
                match clips.get(&e.id) {
                    Some(p) if p != &e.path => log::warn!(
                        "clip {} is listed by several manifests; using {}",
                        e.id,
                        p.display()
                    ),
                    Some(_) => {}
                    None => {
                        clips.insert(e.id, e.path);
                    }
                }
            }
        }

        let mut pairs: Vec<PairItem> = Vec::new();
        let mut pair_index: HashMap<(ClipId, ClipId), usize> = HashMap::new();
        for r in &retrievals {
            for m in &r.result.retrieved {
                let score = PairScore {
                    label: r.label.clone(),
                    raw: m.raw,
                    bias: m.bias,
                    normalized: m.normalized,
                };
                let key = (m.query.clone(), m.reference.clone());
                match pair_index.get(&key) {
                    Some(&i) => pairs[i].scores.push(score),
                    None => {
                        pair_index.insert(key, pairs.len());
                        pairs.push(PairItem {
                            position: pairs.len(),
                            query: m.query.clone(),
                            reference: m.reference.clone(),
                            scores: vec![score],
                        });
                    }
                }
            }
        }
        let unknown = pairs
            .iter()
            .flat_map(|p| [&p.query, &p.reference])
            .filter(|id| !clips.contains_key(*id))
            .count();
        if unknown > 0 {
            log::warn!("{unknown} retrieved clip references are not in any session manifest");
        }

        Ok(Session {
            dir: dir.to_path_buf(),
            spec,
            retrievals,
            clusters,
            pairs,
            clips,
            pair_index,
        })
    }

    pub fn verdict_log_path(&self) -> PathBuf {
        self.dir.join(VERDICT_LOG)
    }

    pub fn static_dir(&self) -> Option<PathBuf> {
        self.spec
            .static_dir
            .as_ref()
            .map(|p| if p.is_absolute() { p.clone() } else { self.dir.join(p) })
    }

    pub fn clip_path(&self, id: &ClipId) -> Option<&Path> {
        self.clips.get(id).map(PathBuf::as_path)
    }

    pub fn pair(&self, query: &ClipId, reference: &ClipId) -> Option<&PairItem> {
        self.pair_index
            .get(&(query.clone(), reference.clone()))
            .map(|&i| &self.pairs[i])
    }

    pub fn has_cluster(&self, component_id: u32) -> bool {
        self.clusters
            .as_ref()
            .is_some_and(|c| c.clusters.iter().any(|x| x.component_id == component_id))
    }
}
