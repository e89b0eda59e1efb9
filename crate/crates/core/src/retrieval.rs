//! Retrieval stage: thresholded top-1 selection, score histograms and
//! threshold calibration reports.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};
use crate::simcore::{self, BackgroundSet, ScoredMatch, TopkOptions};

pub const DEFAULT_TAU_MEL: f64 = 0.5005;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    #[serde(with = "extended_f64")]
    pub tau: f64,
    pub k: usize,
    pub beta: f64,
    pub descriptor_kind: DescriptorKind,
    #[serde(default = "default_block")]
    pub block_size: usize,
}

fn default_block() -> usize {
    simcore::DEFAULT_BLOCK
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            tau: DEFAULT_TAU_MEL,
            k: DEFAULT_K,
            beta: DEFAULT_BETA,
            descriptor_kind: DescriptorKind::Mel,
            block_size: simcore::DEFAULT_BLOCK,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.tau.is_nan() {
            return Err(Error::Config("tau is NaN".into()));
        }
        Ok(())
    }

    pub fn background(&self, set: DescriptorSet) -> Result<BackgroundSet> {
        BackgroundSet::new(set, self.k, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Top-1 matches at or above `tau`, best first.
    pub retrieved: Vec<ScoredMatch>,
    /// Top-1 match of every query, in query order.
    pub all_top1: Vec<ScoredMatch>,
    pub config: RetrievalConfig,
    pub query_corpus: String,
    pub reference_corpus: String,
    pub background_corpus: String,
    pub query_count: usize,
}

fn sort_retrieved(v: &mut [ScoredMatch]) {
    v.sort_by(|a, b| b.normalized.total_cmp(&a.normalized).then_with(|| a.query.cmp(&b.query)));
}

/// Queries whose best normalized score reaches `tau`, with their top match.
pub fn retrieve(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    bg: &BackgroundSet,
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult> {
    cfg.validate()?;
    if bg.k() != cfg.k || bg.beta() != cfg.beta {
        return Err(Error::contract(format!(
            "background uses K={} beta={}, configuration says K={} beta={}",
            bg.k(),
            bg.beta(),
            cfg.k,
            cfg.beta
        )));
    }
    if queries.kind() != cfg.descriptor_kind {
        return Err(Error::contract(format!(
            "query descriptors are {}, configuration expects {}",
            queries.kind(),
            cfg.descriptor_kind
        )));
    }
    let opts = TopkOptions {
        k: 1,
        block_size: cfg.block_size,
        exclude_self: false,
    };
    let all_top1: Vec<ScoredMatch> = if refs.is_empty() {
        // still validates compatibility
        simcore::topk_with(queries, refs, bg, &opts)?;
        Vec::new()
    } else {
        simcore::topk_with(queries, refs, bg, &opts)?
            .into_iter()
            .filter_map(|mut v| v.drain(..).next())
            .collect()
    };
    let mut retrieved: Vec<ScoredMatch> = all_top1
        .iter()
        .filter(|m| m.normalized >= cfg.tau)
        .cloned()
        .collect();
    sort_retrieved(&mut retrieved);
    Ok(RetrievalResult {
        retrieved,
        all_top1,
        config: cfg.clone(),
        query_corpus: queries.corpus_id().to_string(),
        reference_corpus: refs.corpus_id().to_string(),
        background_corpus: bg.descriptors().corpus_id().to_string(),
        query_count: queries.len(),
    })
}

impl RetrievalResult {
    /// Re-applies a different threshold to the stored top-1 scores.
    pub fn with_tau(&self, tau: f64) -> RetrievalResult {
        let mut out = self.clone();
        out.config.tau = tau;
        out.retrieved = self.all_top1.iter().filter(|m| m.normalized >= tau).cloned().collect();
        sort_retrieved(&mut out.retrieved);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub label: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bins {
    /// Equal-width bins over the observed score range.
    Count(usize),
    Edges(Vec<f64>),
}

/// `bins` equal-width edges spanning `[min, max]` of all given series.
/// A zero-width range is widened to `[min - 0.5, min + 0.5]`.
pub fn uniform_edges(series: &[&[f64]], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::contract("histogram needs at least one bin"));
    }
    let all = series.iter().flat_map(|s| s.iter().copied());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect();
    edges[bins] = hi;
    Ok(edges)
}

impl ScoreHistogram {
    /// Bins are `[e_i, e_{i+1})` except the last, which is closed. Scores
    /// outside the edges are counted in the first or last bin, so the total
    /// always equals the number of scores.
    pub fn from_scores(label: impl Into<String>, scores: &[f64], edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::contract("histogram needs at least one bin"));
        }
        // written negated so NaN edges fail too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::contract("histogram edges must be strictly increasing"));
        }
        let n_bins = edges.len() - 1;
        let mut counts = vec![0u64; n_bins];
        for &s in scores {
            let bin = edges.partition_point(|&e| e <= s).saturating_sub(1).min(n_bins - 1);
            counts[bin] += 1;
        }
        Ok(ScoreHistogram {
            label: label.into(),
            bin_edges: edges,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of scores at or above the lower edge of bin `i`.
    pub fn count_from_bin(&self, i: usize) -> u64 {
        self.counts[i.min(self.counts.len())..].iter().sum()
    }
}

/// Top-1 normalized score of each row of `a` against `b`. When both sets
/// are the same corpus (by corpus id) each row's own entry is skipped.
pub fn top1_scores(a: &DescriptorSet, b: &DescriptorSet, bg: &BackgroundSet, block_size: usize) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("histogram inputs must be non-empty"));
    }
    let same = a.corpus_id() == b.corpus_id();
    if same && b.len() < 2 {
        return Err(Error::contract("self-comparison needs at least two clips"));
    }
    let opts = TopkOptions {
        k: 1,
        block_size,
        exclude_self: same,
    };
    let lists = simcore::topk_with(a, b, bg, &opts)?;
    lists
        .into_iter()
        .map(|v| {
            v.first()
                .map(|m| m.normalized)
                .ok_or_else(|| Error::contract("query without any candidate reference"))
        })
        .collect()
}

pub fn histogram_top1(
    a: &DescriptorSet,
    b: &DescriptorSet,
    bg: &BackgroundSet,
    bins: &Bins,
    label: impl Into<String>,
) -> Result<ScoreHistogram> {
    if matches!(bins, Bins::Count(0)) {
        return Err(Error::contract("histogram needs at least one bin"));
    }
    let scores = top1_scores(a, b, bg, simcore::DEFAULT_BLOCK)?;
    let edges = match bins {
        Bins::Count(n) => uniform_edges(&[&scores], *n)?,
        Bins::Edges(e) => e.clone(),
    };
    ScoreHistogram::from_scores(label, &scores, edges)
}

/// Counts above one candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub edge: f64,
    pub queries_above: u64,
    pub self_above: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    /// Some edge keeps every query score and no self score.
    Full,
    Partial,
    /// No edge keeps a larger fraction of queries than of self scores.
    Inseparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub grid: Vec<EdgeCounts>,
    pub separation: Separation,
    /// Edge maximizing `queries_above / |Q| - self_above / |S|` (lowest edge
    /// on ties). `None` when inseparable.
    pub suggested_tau: Option<f64>,
    pub best_margin: f64,
    /// Lowest edge above which no self score remains.
    pub first_clear_edge: Option<f64>,
    /// Shared mass of the two normalized histograms, in [0, 1].
    pub overlap: f64,
    pub query_total: u64,
    pub self_total: u64,
}

/// Reports candidate separation points between a query→reference histogram
/// and a reference→reference histogram. Grid edges are the lower bin edges.
pub fn calibrate_threshold(hist_query: &ScoreHistogram, hist_self: &ScoreHistogram) -> Result<CalibrationReport> {
    if hist_query.bin_edges != hist_self.bin_edges {
        return Err(Error::contract("histograms have different bin edges"));
    }
    let (nq, ns) = (hist_query.total(), hist_self.total());
    let n_bins = hist_query.counts.len();
    let grid: Vec<EdgeCounts> = (0..n_bins)
        .map(|i| EdgeCounts {
            edge: hist_query.bin_edges[i],
            queries_above: hist_query.count_from_bin(i),
            self_above: hist_self.count_from_bin(i),
        })
        .collect();
    let frac = |c: u64, n: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let mut best: Option<(f64, f64)> = None;
    for g in &grid {
        let m = frac(g.queries_above, nq) - frac(g.self_above, ns);
        if best.is_none_or(|(bm, _)| m > bm) {
            best = Some((m, g.edge));
        }
    }
    let (best_margin, best_edge) = best.unwrap_or((0.0, f64::NAN));
    let full = nq > 0 && grid.iter().any(|g| g.queries_above == nq && g.self_above == 0);
    let separation = if full {
        Separation::Full
    } else if best_margin > 0.0 {
        Separation::Partial
    } else {
        Separation::Inseparable
    };
    let overlap = hist_query
        .counts
        .iter()
        .zip(&hist_self.counts)
        .map(|(&a, &b)| frac(a, nq).min(frac(b, ns)))
        .sum();
    Ok(CalibrationReport {
        first_clear_edge: grid.iter().find(|g| g.self_above == 0).map(|g| g.edge),
        grid,
        separation,
        suggested_tau: (separation != Separation::Inseparable).then_some(best_edge),
        best_margin,
        overlap,
        query_total: nq,
        self_total: ns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCountThreshold {
    pub tau: f64,
    pub count: usize,
}

/// Threshold on `result`'s top-1 scores that retrieves exactly `n` queries,
/// or the closest achievable count (ties toward fewer).
pub fn match_count_threshold(result: &RetrievalResult, n: usize) -> MatchCountThreshold {
    let mut scores: Vec<f64> = result.all_top1.iter().map(|m| m.normalized).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    threshold_for_count(&scores, n)
}

fn threshold_for_count(desc: &[f64], n: usize) -> MatchCountThreshold {
    let above_max = |s: &[f64]| s.first().map_or(f64::INFINITY, |m| m.next_up());
    if n == 0 || desc.is_empty() {
        return MatchCountThreshold {
            tau: above_max(desc),
            count: 0,
        };
    }
    let n = n.min(desc.len());
    let pivot = desc[n - 1];
    // count(>= pivot) >= n; the next achievable count below it is count(> pivot)
    let more = desc.partition_point(|&s| s >= pivot);
    let fewer = desc.partition_point(|&s| s > pivot);
    if more == n || more - n < n - fewer {
        MatchCountThreshold { tau: pivot, count: more }
    } else if fewer == 0 {
        MatchCountThreshold {
            tau: above_max(desc),
            count: 0,
        }
    } else {
        MatchCountThreshold {
            tau: desc[fewer - 1],
            count: fewer,
        }
    }
}

/// Serializes non-finite thresholds as the strings "inf", "-inf".
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad threshold {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RetrievalRecord {
    Config {
        #[serde(flatten)]
        config: RetrievalConfig,
        query_corpus: String,
        reference_corpus: String,
        background_corpus: String,
        query_count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pipeline: Option<serde_json::Value>,
    },
    Match {
        #[serde(flatten)]
        m: ScoredMatch,
        retrieved: bool,
    },
}

/// Line-delimited output: one `config` record, then one `match` record per
/// query (its top-1, in query order) flagged with `retrieved`.
pub fn write_jsonl<W: Write>(result: &RetrievalResult, pipeline: Option<&serde_json::Value>, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<retrieval output>", e);
    let header = RetrievalRecord::Config {
        config: result.config.clone(),
        query_corpus: result.query_corpus.clone(),
        reference_corpus: result.reference_corpus.clone(),
        background_corpus: result.background_corpus.clone(),
        query_count: result.query_count,
        pipeline: pipeline.cloned(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("serializable")).map_err(io)?;
    for m in &result.all_top1 {
        let rec = RetrievalRecord::Match {
            m: m.clone(),
            retrieved: m.normalized >= result.config.tau,
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("serializable")).map_err(io)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<RetrievalResult> {
    let mut header = None;
    let mut all_top1 = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<retrieval input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RetrievalRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format("retrieval results", format!("line {}: {e}", lineno + 1)))?;
        match rec {
            RetrievalRecord::Config {
                config,
                query_corpus,
                reference_corpus,
                background_corpus,
                query_count,
                ..
            } => header = Some((config, query_corpus, reference_corpus, background_corpus, query_count)),
            RetrievalRecord::Match { m, .. } => all_top1.push(m),
        }
    }
    let (config, query_corpus, reference_corpus, background_corpus, query_count) =
        header.ok_or_else(|| Error::format("retrieval results", "missing config record"))?;
    let mut retrieved: Vec<ScoredMatch> = all_top1.iter().filter(|m| m.normalized >= config.tau).cloned().collect();
    sort_retrieved(&mut retrieved);
    Ok(RetrievalResult {
        retrieved,
        all_top1,
        config,
        query_corpus,
        reference_corpus,
        background_corpus,
        query_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum HistogramRecord {
    Config {
        k: usize,
        beta: f64,
        bins: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pipeline: Option<serde_json::Value>,
    },
    Histogram {
        #[serde(flatten)]
        hist: ScoreHistogram,
    },
    Calibration {
        #[serde(flatten)]
        report: CalibrationReport,
    },
}
