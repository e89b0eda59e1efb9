use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::ClipId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode audio file {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("{path}: sample rate {found} Hz is not supported (expected {expected} Hz, no resampling is performed)")]
    SampleRate {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("ingestion failed for {} entr{}: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, format_failures(.0))]
    Ingestion(Vec<IngestFailure>),

    #[error("missing ids in embedding file: {}", join_ids(.0))]
    MissingIds(Vec<ClipId>),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

/// One manifest entry that could not be turned into a descriptor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IngestFailure {
    pub id: ClipId,
    pub path: PathBuf,
    pub reason: String,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for violated preconditions on otherwise well-formed inputs
    /// (dimension or kind mismatches, undersized background sets, ...).
    pub fn is_contract_violation(&self) -> bool {
        matches!(self, Error::Contract(_))
    }
}

fn format_failures(failures: &[IngestFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("{} ({}): {}", f.id, f.path.display(), f.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

fn join_ids(ids: &[ClipId]) -> String {
    ids.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
}
