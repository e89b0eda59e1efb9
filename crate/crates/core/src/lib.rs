//! Audio copy detection toolkit.
//!
//! Clips are summarized as log-mel descriptors (or imported embedding
//! vectors), compared with background-normalized cosine similarity, and
//! either matched query-to-reference (retrieval) or clustered within one
//! corpus (deduplication). All candidate pairs are meant for human review.

pub mod corpus;
pub mod dedup;
pub mod descfile;
pub mod error;
pub mod exec;
pub mod melspec;
pub mod retrieval;
pub mod simcore;

pub use corpus::{AudioClip, ClipId, CorpusManifest, DescriptorKind, DescriptorSet};
pub use error::{Error, Result};
pub use simcore::{BackgroundSet, ScoredMatch};
