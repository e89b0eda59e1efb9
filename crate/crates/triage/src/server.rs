//! HTTP API over a session. Session data is immutable and shared; verdict
//! writes go through one lock around the store.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use echotrace_core::corpus::{load_clip_as, ClipId, CLIP_SAMPLES};
use echotrace_core::dedup::PairScore as ClusterPairScore;
use echotrace_core::retrieval::RetrievalConfig;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{Error, Result};
use crate::session::{PairItem, Session};
use crate::spectrogram::render_spectrogram;
use crate::stats::{consensus, replication_stats, Consensus};
use crate::verdicts::{Label, Recorded, Verdict, VerdictKey, VerdictStore, VerdictSubmission};

/// Shown to reviewers next to every pair.
pub const GUIDANCE: &str = "Mark a pair as replicated when the generated clip reproduces the same \
complex spectro-temporal pattern as the training clip, so that one is nearly identical to the other. \
Stationary noise and constant tones do not count as replication on their own. Use unsure when the \
similarity is partial or cannot be judged.";

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    pub session: Arc<Session>,
    pub store: Arc<RwLock<VerdictStore>>,
}

impl AppState {
    pub fn open(session_dir: &Path) -> Result<AppState> {
        let session = Session::open(session_dir)?;
        let store = VerdictStore::open(&session.verdict_log_path())?;
        Ok(AppState {
            session: Arc::new(session),
            store: Arc::new(RwLock::new(store)),
        })
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/pairs", get(get_pairs))
        .route("/api/clips/{id}/audio", get(get_audio))
        .route("/api/clips/{id}/spectrogram", get(get_spectrogram))
        .route("/api/verdicts", post(post_verdict))
        .route("/api/summary", get(get_summary))
        .route("/api/clusters", get(get_clusters));
    let api = match state.session.static_dir() {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError(Error::NotFound("no such endpoint".into())) }),
    };
    api.with_state(state)
}

/// Opens the session in `session_dir` and serves it on `addr` until the
/// process is stopped.
pub async fn serve(session_dir: &Path, addr: &str) -> Result<()> {
    let state = AppState::open(session_dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Session(format!("cannot listen on {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Error::Session(e.to_string()))?;
    log::info!(
        "serving {} pairs from {} on http://{local}",
        state.session.pairs.len(),
        session_dir.display()
    );
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::Session(format!("server stopped: {e}")))
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Rejected(_) => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Serialize)]
struct RetrievalInfo {
    label: String,
    query_corpus: String,
    reference_corpus: String,
    background_corpus: String,
    query_count: usize,
    retrieved: usize,
    config: RetrievalConfig,
}

#[derive(Serialize)]
struct ClusterInfo {
    corpus_id: String,
    tau: f64,
    k: usize,
    beta: f64,
    clip_count: usize,
    clusters: usize,
}

#[derive(Serialize)]
struct Progress {
    pairs: usize,
    pairs_reviewed: usize,
    clusters: usize,
    clusters_reviewed: usize,
    verdicts: usize,
    by_label: BTreeMap<Label, usize>,
}

#[derive(Serialize)]
struct SessionInfo {
    title: Option<String>,
    guidance: &'static str,
    retrievals: Vec<RetrievalInfo>,
    clusters: Option<ClusterInfo>,
    progress: Progress,
}

async fn get_session(State(st): State<AppState>) -> ApiResult<Json<SessionInfo>> {
    let s = &st.session;
    let store = st.store.read().unwrap();
    let mut by_label = BTreeMap::new();
    for v in store.current() {
        *by_label.entry(v.label).or_default() += 1;
    }
    let pairs_reviewed = s
        .pairs
        .iter()
        .filter(|p| store.for_key(&pair_key(p)).next().is_some())
        .count();
    let cluster_ids: Vec<u32> = s
        .clusters
        .iter()
        .flat_map(|c| c.clusters.iter().map(|x| x.component_id))
        .collect();
    let clusters_reviewed = cluster_ids
        .iter()
        .filter(|&&id| store.for_key(&VerdictKey::Cluster { component_id: id }).next().is_some())
        .count();
    Ok(Json(SessionInfo {
        title: s.spec.title.clone(),
        guidance: GUIDANCE,
        retrievals: s
            .retrievals
            .iter()
            .map(|r| RetrievalInfo {
                label: r.label.clone(),
                query_corpus: r.result.query_corpus.clone(),
                reference_corpus: r.result.reference_corpus.clone(),
                background_corpus: r.result.background_corpus.clone(),
                query_count: r.result.query_count,
                retrieved: r.result.retrieved.len(),
                config: r.result.config.clone(),
            })
            .collect(),
        clusters: s.clusters.as_ref().map(|c| ClusterInfo {
            corpus_id: c.corpus_id.clone(),
            tau: c.tau,
            k: c.k,
            beta: c.beta,
            clip_count: c.clip_count,
            clusters: c.clusters.len(),
        }),
        progress: Progress {
            pairs: s.pairs.len(),
            pairs_reviewed,
            clusters: cluster_ids.len(),
            clusters_reviewed,
            verdicts: store.len(),
            by_label,
        },
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PairFilter {
    #[default]
    All,
    Unreviewed,
    Reviewed,
    Replicated,
    NotReplicated,
    Unsure,
}

#[derive(Deserialize)]
struct PairQuery {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
    #[serde(default)]
    filter: PairFilter,
    /// Restricts verdict-based filters to one annotator's verdicts.
    annotator: Option<String>,
    /// Only pairs retrieved under this label.
    retrieval: Option<String>,
    #[serde(default)]
    consensus: Consensus,
}

#[derive(Serialize)]
struct VerdictView {
    annotator: String,
    label: Label,
    timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl From<&Verdict> for VerdictView {
    fn from(v: &Verdict) -> Self {
        VerdictView {
            annotator: v.annotator.clone(),
            label: v.label,
            timestamp: v.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            note: v.note.clone(),
        }
    }
}

#[derive(Serialize)]
struct PairView {
    #[serde(flatten)]
    pair: PairItem,
    verdicts: Vec<VerdictView>,
    consensus: Option<Label>,
}

#[derive(Serialize)]
struct PairPage {
    total: usize,
    offset: usize,
    limit: usize,
    items: Vec<PairView>,
}

fn pair_key(p: &PairItem) -> VerdictKey {
    VerdictKey::Pair {
        query: p.query.clone(),
        reference: p.reference.clone(),
    }
}

async fn get_pairs(State(st): State<AppState>, Query(q): Query<PairQuery>) -> ApiResult<Json<PairPage>> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let store = st.store.read().unwrap();
    let mut matching = Vec::new();
    for p in &st.session.pairs {
        if let Some(r) = &q.retrieval {
            if !p.scores.iter().any(|s| &s.label == r) {
                continue;
            }
        }
        let key = pair_key(p);
        let labels: Vec<Label> = store
            .for_key(&key)
            .filter(|v| q.annotator.as_ref().is_none_or(|a| &v.annotator == a))
            .map(|v| v.label)
            .collect();
        let decided = consensus(&labels, q.consensus);
        let keep = match q.filter {
            PairFilter::All => true,
            PairFilter::Unreviewed => decided.is_none(),
            PairFilter::Reviewed => decided.is_some(),
            PairFilter::Replicated => decided == Some(Label::Replicated),
            PairFilter::NotReplicated => decided == Some(Label::NotReplicated),
            PairFilter::Unsure => decided == Some(Label::Unsure),
        };
        if keep {
            matching.push((p, key));
        }
    }
    let total = matching.len();
    let items = matching
        .into_iter()
        .skip(q.offset)
        .take(limit)
        .map(|(p, key)| {
            let verdicts: Vec<&Verdict> = store.for_key(&key).collect();
            let labels: Vec<Label> = verdicts.iter().map(|v| v.label).collect();
            PairView {
                pair: p.clone(),
                consensus: consensus(&labels, q.consensus),
                verdicts: verdicts.into_iter().map(VerdictView::from).collect(),
            }
        })
        .collect();
    Ok(Json(PairPage {
        total,
        offset: q.offset,
        limit,
        items,
    }))
}

fn clip_path(st: &AppState, id: &str) -> ApiResult<(ClipId, std::path::PathBuf)> {
    let clip = ClipId::new(id).map_err(|_| Error::NotFound(format!("clip {id:?}")))?;
    let path = st
        .session
        .clip_path(&clip)
        .ok_or_else(|| Error::NotFound(format!("clip {id} is not in this session")))?
        .to_path_buf();
    Ok((clip, path))
}

async fn get_audio(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (_, path) = clip_path(&st, &id)?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| Error::io(&path, e))?;
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("wav") => "audio/wav",
        Some("flac") => "audio/flac",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn get_spectrogram(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (clip, path) = clip_path(&st, &id)?;
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>> {
        let clip = load_clip_as(clip, &path, CLIP_SAMPLES)?;
        render_spectrogram(&clip)
    })
    .await
    .map_err(|e| Error::Session(format!("render task failed: {e}")))??;
    Ok((
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "max-age=3600")],
        png,
    )
        .into_response())
}

#[derive(Serialize)]
struct VerdictAck {
    status: Recorded,
    verdict: Verdict,
}

async fn post_verdict(State(st): State<AppState>, body: Bytes) -> ApiResult<Json<VerdictAck>> {
    let sub: VerdictSubmission =
        serde_json::from_slice(&body).map_err(|e| Error::Rejected(format!("malformed verdict: {e}")))?;
    match &sub.key {
        VerdictKey::Pair { query, reference } => {
            if st.session.pair(query, reference).is_none() {
                return Err(Error::Rejected(format!("pair ({query}, {reference}) is not in this session")).into());
            }
        }
        VerdictKey::Cluster { component_id } => {
            if !st.session.has_cluster(*component_id) {
                return Err(Error::Rejected(format!("cluster {component_id} is not in this session")).into());
            }
        }
    }
    let verdict = sub.into_verdict(Utc::now());
    let mut store = st.store.write().unwrap();
    let status = store.record(verdict.clone())?;
    let current = store
        .for_key(&verdict.key)
        .find(|v| v.annotator == verdict.annotator)
        .cloned();
    let verdict = current.unwrap_or(verdict);
    Ok(Json(VerdictAck { status, verdict }))
}

#[derive(Deserialize)]
struct SummaryQuery {
    #[serde(default)]
    consensus: Consensus,
}

async fn get_summary(State(st): State<AppState>, Query(q): Query<SummaryQuery>) -> ApiResult<Json<crate::Summary>> {
    let store = st.store.read().unwrap();
    Ok(Json(replication_stats(&st.session, store.current(), q.consensus)))
}

#[derive(Serialize)]
struct ClusterView {
    component_id: u32,
    members: Vec<ClipId>,
    pairwise_scores: Vec<ClusterPairScore>,
    verdicts: Vec<VerdictView>,
    consensus: Option<Label>,
}

#[derive(Serialize)]
struct ClusterPage {
    corpus_id: Option<String>,
    tau: Option<f64>,
    clusters: Vec<ClusterView>,
}

async fn get_clusters(State(st): State<AppState>, Query(q): Query<SummaryQuery>) -> ApiResult<Json<ClusterPage>> {
    let store = st.store.read().unwrap();
    let Some(report) = &st.session.clusters else {
        return Ok(Json(ClusterPage {
            corpus_id: None,
            tau: None,
            clusters: Vec::new(),
        }));
    };
    let clusters = report
        .clusters
        .iter()
        .map(|c| {
            let key = VerdictKey::Cluster {
                component_id: c.component_id,
            };
            let verdicts: Vec<&Verdict> = store.for_key(&key).collect();
            let labels: Vec<Label> = verdicts.iter().map(|v| v.label).collect();
            ClusterView {
                component_id: c.component_id,
                members: c.members.clone(),
                pairwise_scores: c.pairwise_scores.clone(),
                consensus: consensus(&labels, q.consensus),
                verdicts: verdicts.into_iter().map(VerdictView::from).collect(),
            }
        })
        .collect();
    Ok(Json(ClusterPage {
        corpus_id: Some(report.corpus_id.clone()),
        tau: Some(report.tau),
        clusters,
    }))
}
