//! Clip identities, audio ingestion and descriptor sets.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descfile;
use crate::error::{Error, IngestFailure, Result};
use crate::exec;
use crate::melspec::{DescriptorConfig, MelExtractor};

/// Sample rate every clip must be stored at.
pub const SAMPLE_RATE: u32 = 16_000;

/// Clip length after padding/truncation: 10.242 s at 16 kHz.
pub const CLIP_SAMPLES: usize = 163_872;

/// Stable identifier of a clip within a corpus.
///
/// Ids are non-empty and may not contain tabs, line breaks or other control
/// characters, since they are stored in the text index of descriptor files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClipId(String);

impl ClipId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::format("clip id", "empty id"));
        }
        if value.chars().any(char::is_control) {
            return Err(Error::format(
                "clip id",
                format!("{value:?} contains control characters"),
            ));
        }
        Ok(ClipId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClipId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        ClipId::new(value)
    }
}

impl From<ClipId> for String {
    fn from(id: ClipId) -> Self {
        id.0
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A mono 16 kHz clip of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: ClipId,
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_path: PathBuf,
    /// Original length when the source was longer than the target and got cut.
    pub truncated_from: Option<usize>,
}

impl AudioClip {
    /// Builds a clip from in-memory mono samples, zero-padding or truncating
    /// to `target_samples`.
    pub fn from_samples(id: ClipId, mut samples: Vec<f32>, target_samples: usize) -> Self {
        let original = samples.len();
        let truncated_from = if original > target_samples {
            log::warn!("clip {id}: {original} samples truncated to {target_samples}");
            samples.truncate(target_samples);
            Some(original)
        } else {
            samples.resize(target_samples, 0.0);
            None
        };
        AudioClip {
            id,
            samples,
            sample_rate: SAMPLE_RATE,
            source_path: PathBuf::new(),
            truncated_from,
        }
    }
}

/// Loads a WAV file, naming the clip after the file stem.
pub fn load_clip(path: &Path, target_samples: usize) -> Result<AudioClip> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Decode {
            path: path.to_path_buf(),
            reason: "file name is not valid UTF-8".into(),
        })?;
    load_clip_as(ClipId::new(stem)?, path, target_samples)
}

/// Loads a 16 kHz WAV file (integer or 32-bit float PCM), averaging channels
/// to mono and zero-padding or truncating to `target_samples`.
pub fn load_clip_as(id: ClipId, path: &Path, target_samples: usize) -> Result<AudioClip> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let samples = decode_wav(path, &bytes)?;
    let mut clip = AudioClip::from_samples(id, samples, target_samples);
    clip.source_path = path.to_path_buf();
    Ok(clip)
}

fn decode_wav(path: &Path, bytes: &[u8]) -> Result<Vec<f32>> {
    let decode_err = |e: hound::Error| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let reader = hound::WavReader::new(std::io::Cursor::new(bytes)).map_err(decode_err)?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRate {
            path: path.to_path_buf(),
            found: spec.sample_rate,
            expected: SAMPLE_RATE,
        });
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(decode_err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(decode_err)?
        }
    };
    if channels == 1 {
        return Ok(interleaved);
    }
    Ok(interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect())
}

/// One line of a manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: ClipId,
    pub path: PathBuf,
    pub caption: Option<String>,
}

/// An ordered list of clips making up one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(corpus_id: impl Into<String>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let corpus_id = corpus_id.into();
        validate_corpus_id(&corpus_id)?;
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.id) {
                return Err(Error::format("manifest", format!("duplicate clip id {}", e.id)));
            }
        }
        Ok(CorpusManifest { corpus_id, entries })
    }

    /// Reads a line-delimited JSON manifest. Relative paths are resolved
    /// against the manifest's directory; the corpus id is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let corpus_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("corpus")
            .to_string();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                Error::format(
                    "manifest",
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                )
            })?;
            entries.push(ManifestEntry::from_record(rec, base)?);
        }
        CorpusManifest::new(corpus_id, entries)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ClipId> {
        self.entries.iter().map(|e| &e.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ManifestEntry {
    /// The record's `id` wins; otherwise the file stem is used.
    pub fn from_record(rec: ManifestRecord, base: &Path) -> Result<Self> {
        let path = if rec.path.is_absolute() {
            rec.path
        } else {
            base.join(rec.path)
        };
        let id = match rec.id {
            Some(id) => ClipId::new(id)?,
            None => {
                let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| {
                    Error::format("manifest", format!("no usable file stem in {}", path.display()))
                })?;
                ClipId::new(stem)?
            }
        };
        Ok(ManifestEntry {
            id,
            path,
            caption: rec.caption,
        })
    }
}

pub(crate) fn validate_corpus_id(corpus_id: &str) -> Result<()> {
    if corpus_id.chars().any(char::is_control) {
        return Err(Error::format(
            "corpus id",
            format!("{corpus_id:?} contains control characters"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Mel,
    Imported,
}

impl DescriptorKind {
    pub fn code(self) -> u8 {
        match self {
            DescriptorKind::Mel => 0,
            DescriptorKind::Imported => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DescriptorKind::Mel),
            1 => Some(DescriptorKind::Imported),
            _ => None,
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DescriptorKind::Mel => "mel",
            DescriptorKind::Imported => "imported",
        })
    }
}

/// Ordered descriptor vectors for one corpus, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    corpus_id: String,
    kind: DescriptorKind,
    dim: usize,
    ids: Vec<ClipId>,
    data: Vec<f32>,
    source_keys: Vec<Option<String>>,
    index: HashMap<ClipId, usize>,
}

impl DescriptorSet {
    pub fn new(corpus_id: impl Into<String>, kind: DescriptorKind, dim: usize) -> Result<Self> {
        let corpus_id = corpus_id.into();
        validate_corpus_id(&corpus_id)?;
        if dim == 0 {
            return Err(Error::format("descriptor set", "dimension must be positive"));
        }
        if kind == DescriptorKind::Mel && dim != crate::melspec::DESCRIPTOR_LEN {
            return Err(Error::format(
                "descriptor set",
                format!(
                    "mel descriptors have {} elements, got dim {dim}",
                    crate::melspec::DESCRIPTOR_LEN
                ),
            ));
        }
        Ok(DescriptorSet {
            corpus_id,
            kind,
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            source_keys: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn push(&mut self, id: ClipId, values: &[f32]) -> Result<()> {
        self.push_keyed(id, values, None)
    }

    /// Adds a row tagged with the content key it was computed from.
    pub fn push_keyed(&mut self, id: ClipId, values: &[f32], key: Option<String>) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::format(
                "descriptor set",
                format!("row {id} has {} values, expected {}", values.len(), self.dim),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                "descriptor set",
                format!("row {id} has a non-finite value at {bad}"),
            ));
        }
        if let Some(k) = &key {
            if k.is_empty() || k.chars().any(|c| c.is_control() || c.is_whitespace()) {
                return Err(Error::format("descriptor set", format!("bad source key {k:?}")));
            }
        }
        if self.index.contains_key(&id) {
            return Err(Error::format("descriptor set", format!("duplicate clip id {id}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        self.source_keys.push(key);
        Ok(())
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[ClipId] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &ClipId {
        &self.ids[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn source_key(&self, row: usize) -> Option<&str> {
        self.source_keys[row].as_deref()
    }

    pub fn position(&self, id: &ClipId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&ClipId, &[f32])> {
        self.ids.iter().zip(self.data.chunks_exact(self.dim))
    }

    pub(crate) fn raw_data(&self) -> &[f32] {
        &self.data
    }

    /// True when the set is non-empty but every vector has (near-)zero norm.
    pub fn is_degenerate(&self) -> bool {
        !self.is_empty()
            && self
                .data
                .chunks_exact(self.dim)
                .all(|r| crate::simcore::norm(r) < crate::simcore::DEGENERATE_NORM)
    }

    /// Returns the subset of rows named by `order`, in that order.
    pub fn select(&self, corpus_id: &str, order: &[ClipId]) -> Result<Self> {
        let missing: Vec<ClipId> = order
            .iter()
            .filter(|id| !self.index.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingIds(missing));
        }
        let mut out = DescriptorSet::new(corpus_id, self.kind, self.dim)?;
        for id in order {
            let row = self.index[id];
            out.push_keyed(id.clone(), self.row(row), self.source_keys[row].clone())?;
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        descfile::read(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        descfile::write(self, path)
    }
}

/// Outcome of a mel ingestion run.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub set: DescriptorSet,
    /// Clips whose audio was silent; their rows are the all-floor descriptor.
    pub degenerate: Vec<ClipId>,
    pub truncated: Vec<ClipId>,
    pub cache_hits: usize,
}

/// Computes one mel descriptor per manifest entry, in manifest order.
///
/// Rows of `previous` whose content key (audio bytes plus descriptor
/// configuration) matches are reused instead of recomputed.
pub fn ingest_corpus(
    manifest: &CorpusManifest,
    cfg: &DescriptorConfig,
    previous: Option<&DescriptorSet>,
) -> Result<Ingested> {
    let extractor = MelExtractor::new(cfg.clone())?;
    let fingerprint = cfg.fingerprint();

    enum Row {
        Cached(Vec<f32>),
        Fresh {
            values: Vec<f32>,
            degenerate: bool,
            truncated: bool,
        },
    }

    let outcomes = exec::map(&manifest.entries, |entry| -> std::result::Result<(String, Row), IngestFailure> {
        let fail = |e: Error| IngestFailure {
            id: entry.id.clone(),
            path: entry.path.clone(),
            reason: e.to_string(),
        };
        let bytes = fs::read(&entry.path).map_err(|e| fail(Error::io(&entry.path, e)))?;
        let key = content_key(&fingerprint, &bytes);
        if let Some(prev) = previous {
            if prev.kind() == DescriptorKind::Mel {
                if let Some(row) = prev.position(&entry.id) {
                    if prev.source_key(row) == Some(key.as_str()) {
                        return Ok((key, Row::Cached(prev.row(row).to_vec())));
                    }
                }
            }
        }
        let samples = decode_wav(&entry.path, &bytes).map_err(fail)?;
        let mut clip = AudioClip::from_samples(entry.id.clone(), samples, cfg.target_samples);
        clip.source_path = entry.path.clone();
        let desc = extractor.extract(&clip).map_err(fail)?;
        Ok((
            key,
            Row::Fresh {
                values: desc.values,
                degenerate: desc.degenerate,
                truncated: clip.truncated_from.is_some(),
            },
        ))
    });

    let mut failures = Vec::new();
    let mut set = DescriptorSet::new(
        manifest.corpus_id.clone(),
        DescriptorKind::Mel,
        crate::melspec::DESCRIPTOR_LEN,
    )?;
    let mut degenerate = Vec::new();
    let mut truncated = Vec::new();
    let mut cache_hits = 0;
    for (entry, outcome) in manifest.entries.iter().zip(outcomes) {
        match outcome {
            Err(f) => failures.push(f),
            Ok((key, Row::Cached(values))) => {
                cache_hits += 1;
                set.push_keyed(entry.id.clone(), &values, Some(key))?;
            }
            Ok((key, Row::Fresh { values, degenerate: d, truncated: t })) => {
                if d {
                    log::warn!("clip {} is silent; using the all-floor descriptor", entry.id);
                    degenerate.push(entry.id.clone());
                }
                if t {
                    truncated.push(entry.id.clone());
                }
                set.push_keyed(entry.id.clone(), &values, Some(key))?;
            }
        }
    }
    if !failures.is_empty() {
        return Err(Error::Ingestion(failures));
    }
    Ok(Ingested {
        set,
        degenerate,
        truncated,
        cache_hits,
    })
}

/// Ingests `manifest` using `cache_path` as the descriptor cache: an existing
/// cache is consulted for unchanged clips, and the fresh set is written back.
pub fn ingest_corpus_cached(
    manifest: &CorpusManifest,
    cfg: &DescriptorConfig,
    cache_path: &Path,
) -> Result<Ingested> {
    let previous = if cache_path.exists() {
        match DescriptorSet::read(cache_path) {
            Ok(set) => Some(set),
            Err(e) => {
                log::warn!("ignoring unreadable cache {}: {e}", cache_path.display());
                None
            }
        }
    } else {
        None
    };
    let ingested = ingest_corpus(manifest, cfg, previous.as_ref())?;
    ingested.set.write(cache_path)?;
    Ok(ingested)
}

fn content_key(fingerprint: &str, bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(fingerprint.as_bytes());
    hasher.update([0u8]);
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Loads externally computed embeddings and reorders them to manifest order.
pub fn import_embeddings(manifest: &CorpusManifest, embedding_file: &Path) -> Result<DescriptorSet> {
    let file = DescriptorSet::read(embedding_file)?;
    let ids: Vec<ClipId> = manifest.ids().cloned().collect();
    let picked = file.select(&manifest.corpus_id, &ids)?;
    let mut out = DescriptorSet::new(&manifest.corpus_id, DescriptorKind::Imported, picked.dim())?;
    for (id, row) in picked.rows() {
        out.push(id.clone(), row)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ClipId {
        ClipId::new(s).unwrap()
    }

    fn write_wav(path: &Path, channels: u16, rate: u32, frames: &[Vec<i16>]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn clip_ids_reject_empty_and_control_chars() {
        assert!(ClipId::new("").is_err());
        assert!(ClipId::new("a\tb").is_err());
        assert!(ClipId::new("a\nb").is_err());
        assert!(ClipId::new("Y0-abc_12.wav").is_ok());
    }

    #[test]
    fn short_clip_is_zero_padded() {
        let clip = AudioClip::from_samples(id("a"), vec![0.5; 80_000], CLIP_SAMPLES);
        assert_eq!(clip.samples.len(), CLIP_SAMPLES);
        assert!(clip.samples[..80_000].iter().all(|&s| s == 0.5));
        assert!(clip.samples[80_000..].iter().all(|&s| s == 0.0));
        assert_eq!(clip.truncated_from, None);
    }

    #[test]
    fn exact_length_clip_is_untouched() {
        let samples: Vec<f32> = (0..CLIP_SAMPLES).map(|i| (i % 7) as f32 / 7.0).collect();
        let clip = AudioClip::from_samples(id("a"), samples.clone(), CLIP_SAMPLES);
        assert_eq!(clip.samples, samples);
        assert_eq!(clip.truncated_from, None);
    }

    #[test]
    fn long_clip_is_cut_at_the_target_index() {
        // ramp: value at index i is i, so the cut point is visible directly
        let ramp: Vec<f32> = (0..192_000).map(|i| i as f32).collect();
        let clip = AudioClip::from_samples(id("a"), ramp, CLIP_SAMPLES);
        assert_eq!(clip.samples.len(), CLIP_SAMPLES);
        assert_eq!(clip.samples[CLIP_SAMPLES - 1], (CLIP_SAMPLES - 1) as f32);
        assert_eq!(clip.truncated_from, Some(192_000));
    }

    #[test]
    fn wav_loading_downmixes_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        write_wav(&path, 2, SAMPLE_RATE, &[vec![16384, 0], vec![-32768, -32768]]);
        let clip = load_clip(&path, 4).unwrap();
        assert_eq!(clip.id.as_str(), "st");
        assert_eq!(clip.samples, vec![0.25, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn float_wav_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: SAMPLE_RATE,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.125f32).unwrap();
        w.finalize().unwrap();
        let clip = load_clip(&path, 2).unwrap();
        assert_eq!(clip.samples, vec![0.125, 0.0]);
    }

    #[test]
    fn off_rate_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        write_wav(&path, 1, 44_100, &[vec![1]]);
        match load_clip(&path, 10) {
            Err(Error::SampleRate { found: 44_100, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreadable_file_names_the_path() {
        let err = load_clip(Path::new("/nonexistent/x.wav"), 10).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.wav"));
    }

    #[test]
    fn manifest_ids_fall_back_to_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("train.jsonl");
        fs::write(
            &mpath,
            "{\"id\":\"first\",\"path\":\"a.wav\",\"caption\":\"a dog barks\"}\n\n{\"path\":\"sub/b.wav\"}\n",
        )
        .unwrap();
        let m = CorpusManifest::load(&mpath).unwrap();
        assert_eq!(m.corpus_id, "train");
        assert_eq!(m.entries[0].id.as_str(), "first");
        assert_eq!(m.entries[0].caption.as_deref(), Some("a dog barks"));
        assert_eq!(m.entries[1].id.as_str(), "b");
        assert_eq!(m.entries[1].path, dir.path().join("sub/b.wav"));
    }

    #[test]
    fn manifest_rejects_duplicates_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("m.jsonl");
        fs::write(&mpath, "{\"path\":\"x/a.wav\"}\n{\"path\":\"y/a.wav\"}\n").unwrap();
        assert!(CorpusManifest::load(&mpath).is_err());
        fs::write(&mpath, "{\"path\":\"a.wav\",\"colour\":1}\n").unwrap();
        assert!(CorpusManifest::load(&mpath).is_err());
    }

    #[test]
    fn descriptor_set_validates_rows() {
        let mut s = DescriptorSet::new("c", DescriptorKind::Imported, 2).unwrap();
        s.push(id("a"), &[1.0, 0.0]).unwrap();
        assert!(s.push(id("b"), &[1.0]).is_err());
        assert!(s.push(id("b"), &[f32::NAN, 0.0]).is_err());
        assert!(s.push(id("a"), &[0.0, 1.0]).is_err());
        assert!(DescriptorSet::new("c", DescriptorKind::Mel, 512).is_err());
        assert!(!s.is_degenerate());
        let mut z = DescriptorSet::new("z", DescriptorKind::Imported, 2).unwrap();
        z.push(id("a"), &[0.0, 0.0]).unwrap();
        assert!(z.is_degenerate());
    }

    #[test]
    fn select_reorders_and_reports_missing() {
        let mut s = DescriptorSet::new("c", DescriptorKind::Imported, 1).unwrap();
        for (i, n) in ["a", "b", "c", "d"].iter().enumerate() {
            s.push(id(n), &[i as f32]).unwrap();
        }
        let picked = s.select("m", &[id("c"), id("a"), id("d")]).unwrap();
        assert_eq!(picked.ids(), &[id("c"), id("a"), id("d")]);
        assert_eq!(picked.row(0), &[2.0]);
        match s.select("m", &[id("a"), id("zz")]) {
            Err(Error::MissingIds(ids)) => assert_eq!(ids, vec![id("zz")]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
