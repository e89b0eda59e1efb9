//! Human verification stage: a session of retrieved pairs and duplicate
//! clusters, an append-only verdict log, replication statistics, spectrogram
//! rendering, and the HTTP service that exposes them to a reviewer.

pub mod error;
pub mod server;
pub mod session;
pub mod spectrogram;
pub mod stats;
pub mod verdicts;

pub use error::{Error, Result};
pub use server::{router, serve, AppState};
pub use session::{Session, SessionSpec};
pub use stats::{replication_stats, Consensus, Summary};
pub use verdicts::{Label, Verdict, VerdictKey, VerdictStore};
