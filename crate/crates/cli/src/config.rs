//! Pipeline configuration file (TOML). Every field is optional and defaults
//! to the standard protocol; unknown keys are rejected.
//!
//! ```toml
//! workers = 8
//!
//! [descriptor.stft]
//! window_len = 2048
//! hop = 1536
//!
//! [descriptor.mel]
//! n_mels = 16
//! floor_db = -40.0
//!
//! [similarity]
//! k = 5
//! beta = 0.5
//!
//! [retrieval]
//! tau = 0.5005
//!
//! [dedup]
//! tau = 0.5025
//! ```

use std::path::Path;

use echotrace_core::dedup::{DedupConfig, DEFAULT_MATERIALIZE_CAP, DEFAULT_TAU_DEDUP};
use echotrace_core::melspec::DescriptorConfig;
use echotrace_core::retrieval::{RetrievalConfig, DEFAULT_BETA, DEFAULT_BINS, DEFAULT_K, DEFAULT_TAU_MEL};
use echotrace_core::simcore::DEFAULT_BLOCK;
use echotrace_core::{DescriptorKind, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    /// Background neighbours averaged into the bias.
    pub k: usize,
    pub beta: f64,
    pub block_size: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            k: DEFAULT_K,
            beta: DEFAULT_BETA,
            block_size: DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSection {
    pub tau: f64,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection { tau: DEFAULT_TAU_MEL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupSection {
    pub tau: f64,
    pub materialize_cap: usize,
}

impl Default for DedupSection {
    fn default() -> Self {
        DedupSection {
            tau: DEFAULT_TAU_DEDUP,
            materialize_cap: DEFAULT_MATERIALIZE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSection {
    pub bins: usize,
}

impl Default for HistogramSection {
    fn default() -> Self {
        HistogramSection { bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Worker threads; unset means all available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub descriptor: DescriptorConfig,
    pub similarity: SimilarityConfig,
    pub retrieval: RetrievalSection,
    pub dedup: DedupSection,
    pub histogram: HistogramSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        self.retrieval_config(DescriptorKind::Mel).validate()?;
        if self.similarity.block_size == 0 {
            return Err(Error::Config("block_size must be positive".into()));
        }
        if self.dedup.tau.is_nan() {
            return Err(Error::Config("dedup tau is NaN".into()));
        }
        if self.histogram.bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn retrieval_config(&self, kind: DescriptorKind) -> RetrievalConfig {
        RetrievalConfig {
            tau: self.retrieval.tau,
            k: self.similarity.k,
            beta: self.similarity.beta,
            descriptor_kind: kind,
            block_size: self.similarity.block_size,
        }
    }

    pub fn dedup_config(&self) -> DedupConfig {
        DedupConfig {
            tau: self.dedup.tau,
            materialize_cap: self.dedup.materialize_cap,
            block_size: self.similarity.block_size,
        }
    }

    /// The configuration as embedded in output files. The worker count is
    /// left out so outputs do not depend on it.
    pub fn echo(&self, command: &str) -> serde_json::Value {
        let mut config = serde_json::to_value(self).expect("serializable");
        if let Some(obj) = config.as_object_mut() {
            obj.remove("workers");
        }
        serde_json::json!({
            "tool": concat!("echotrace ", env!("CARGO_PKG_VERSION")),
            "command": command,
            "config": config,
        })
    }
}
