//! Duplicate clusters within one corpus.
//!
//! Two clips are linked when each one's normalized score against the other
//! exceeds `tau` (`S[i][j] > tau && S[j][i] > tau`); clusters are the
//! connected components of that graph with at least two members.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{ClipId, DescriptorSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::simcore::{self, BackgroundSet, Indexed, ScoreMatrix};

pub const DEFAULT_TAU_DEDUP: f64 = 0.5025;
pub const DEFAULT_MATERIALIZE_CAP: usize = 20_000;

/// Undirected graph over the rows of a corpus. Edges are stored once as
/// `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    pub ids: Vec<ClipId>,
    pub edges: Vec<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn new(ids: Vec<ClipId>, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = ids.len();
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(Error::contract(format!("self-loop on node {}", e.0)));
            }
            if e.0 >= n || e.1 >= n {
                return Err(Error::contract(format!("edge {e:?} out of range for {n} nodes")));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(AdjacencyGraph { ids, edges })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).is_ok()
    }
}

/// Thresholds a self-similarity matrix into the mutual adjacency graph.
pub fn build_adjacency(s: &ScoreMatrix, tau: f64) -> Result<AdjacencyGraph> {
    let n = s.n();
    if let Some(i) = (0..n).find(|&i| s.get(i, i) != 0.0) {
        return Err(Error::contract(format!("score matrix diagonal is not zeroed at row {i}")));
    }
    let rows = exec::map_range(n, |i| {
        ((i + 1)..n)
            .filter(|&j| s.get(i, j) > tau && s.get(j, i) > tau)
            .map(|j| (i, j))
            .collect::<Vec<_>>()
    });
    Ok(AdjacencyGraph {
        ids: s.ids().to_vec(),
        edges: rows.concat(),
    })
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterStatus {
    Candidate,
    Confirmed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: ClipId,
    pub b: ClipId,
    /// `S[a][b]`, scored with `a` as the query.
    pub a_to_b: f64,
    pub b_to_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub component_id: u32,
    /// Sorted by clip id.
    pub members: Vec<ClipId>,
    pub status: ClusterStatus,
    #[serde(default)]
    pub pairwise_scores: Vec<PairScore>,
}

/// Components with two or more nodes, numbered in order of their smallest
/// member id.
pub fn connected_components(g: &AdjacencyGraph) -> Vec<DuplicateCluster> {
    component_members(g)
        .into_iter()
        .enumerate()
        .map(|(cid, members)| DuplicateCluster {
            component_id: cid as u32,
            members: members.into_iter().map(|i| g.ids[i].clone()).collect(),
            status: ClusterStatus::Candidate,
            pairwise_scores: Vec::new(),
        })
        .collect()
}

/// Node indices of each non-singleton component, members sorted by id and
/// components ordered by their first member's id.
fn component_members(g: &AdjacencyGraph) -> Vec<Vec<usize>> {
    let mut dsu = DisjointSet::new(g.n());
    for &(i, j) in &g.edges {
        dsu.union(i, j);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..g.n() {
        groups.entry(dsu.find(i)).or_default().push(i);
    }
    let mut comps: Vec<Vec<usize>> = groups
        .into_values()
        .filter(|m| m.len() >= 2)
        .map(|mut m| {
            m.sort_by(|&a, &b| g.ids[a].cmp(&g.ids[b]));
            m
        })
        .collect();
    comps.sort_by(|a, b| g.ids[a[0]].cmp(&g.ids[b[0]]));
    comps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub tau: f64,
    /// Above this many clips the score matrix is streamed in row blocks
    /// instead of materialized.
    pub materialize_cap: usize,
    pub block_size: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            tau: DEFAULT_TAU_DEDUP,
            materialize_cap: DEFAULT_MATERIALIZE_CAP,
            block_size: simcore::DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub corpus_id: String,
    pub tau: f64,
    pub k: usize,
    pub beta: f64,
    pub clip_count: usize,
    pub edge_count: usize,
    /// Sorted by size (largest first), then component id.
    pub clusters: Vec<DuplicateCluster>,
    /// Cluster size → number of clusters of that size.
    pub size_summary: BTreeMap<usize, usize>,
}

/// A mutually linked pair with both directed scores.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MutualPair {
    i: usize,
    j: usize,
    s_ij: f64,
    s_ji: f64,
}

impl MutualPair {
    fn min(&self) -> f64 {
        self.s_ij.min(self.s_ji)
    }
}

/// All pairs `i < j` whose scores both exceed `floor`, computed in row
/// blocks without materializing the matrix.
fn mutual_pairs_streamed(
    refs: &DescriptorSet,
    biases: &[f64],
    beta: f64,
    floor: f64,
    block: usize,
) -> Vec<MutualPair> {
    let ix = Indexed::new(refs);
    let n = refs.len();
    let block = block.max(1);
    exec::map_range(n.div_ceil(block), |b| {
        let mut out = Vec::new();
        for i in b * block..((b + 1) * block).min(n) {
            let q = refs.row(i);
            for j in (i + 1)..n {
                let cos = ix.cos(j, q, ix.norms[i]);
                let s_ij = cos - beta * biases[i];
                if s_ij <= floor {
                    continue;
                }
                let s_ji = cos - beta * biases[j];
                if s_ji > floor {
                    out.push(MutualPair { i, j, s_ij, s_ji });
                }
            }
        }
        out
    })
    .concat()
}

fn mutual_pairs(refs: &DescriptorSet, bg: &BackgroundSet, floor: f64, cfg: &DedupConfig) -> Result<Vec<MutualPair>> {
    if refs.is_empty() {
        return Err(Error::contract("deduplication of an empty corpus"));
    }
    if refs.len() <= cfg.materialize_cap {
        let s = simcore::self_similarity_blocked(refs, bg, cfg.block_size)?;
        let g = build_adjacency(&s, floor)?;
        Ok(g.edges
            .iter()
            .map(|&(i, j)| MutualPair {
                i,
                j,
                s_ij: s.get(i, j),
                s_ji: s.get(j, i),
            })
            .collect())
    } else {
        let biases = simcore::row_biases(refs, bg)?;
        Ok(mutual_pairs_streamed(refs, &biases, bg.beta(), floor, cfg.block_size))
    }
}

fn report_from_pairs(refs: &DescriptorSet, bg: &BackgroundSet, tau: f64, pairs: &[MutualPair]) -> ClusterReport {
    let g = AdjacencyGraph {
        ids: refs.ids().to_vec(),
        edges: pairs.iter().map(|p| (p.i, p.j)).collect(),
    };
    let comps = component_members(&g);
    let mut node_comp = vec![usize::MAX; refs.len()];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            node_comp[m] = c;
        }
    }
    let mut scores: Vec<Vec<PairScore>> = vec![Vec::new(); comps.len()];
    for p in pairs {
        scores[node_comp[p.i]].push(PairScore {
            a: refs.id(p.i).clone(),
            b: refs.id(p.j).clone(),
            a_to_b: p.s_ij,
            b_to_a: p.s_ji,
        });
    }
    let mut clusters: Vec<DuplicateCluster> = comps
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(cid, (members, mut pairwise_scores))| {
            pairwise_scores.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
            DuplicateCluster {
                component_id: cid as u32,
                members: members.into_iter().map(|i| refs.id(i).clone()).collect(),
                status: ClusterStatus::Candidate,
                pairwise_scores,
            }
        })
        .collect();
    clusters.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then(a.component_id.cmp(&b.component_id)));
    let mut size_summary = BTreeMap::new();
    for c in &clusters {
        *size_summary.entry(c.members.len()).or_insert(0) += 1;
    }
    ClusterReport {
        corpus_id: refs.corpus_id().to_string(),
        tau,
        k: bg.k(),
        beta: bg.beta(),
        clip_count: refs.len(),
        edge_count: pairs.len(),
        clusters,
        size_summary,
    }
}

/// Self-similarity, mutual thresholding and connected components.
pub fn dedup_corpus(refs: &DescriptorSet, bg: &BackgroundSet, cfg: &DedupConfig) -> Result<ClusterReport> {
    if cfg.tau.is_nan() {
        return Err(Error::Config("dedup tau is NaN".into()));
    }
    let pairs = mutual_pairs(refs, bg, cfg.tau, cfg)?;
    Ok(report_from_pairs(refs, bg, cfg.tau, &pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub edges: usize,
    pub clusters: usize,
    pub clustered_clips: usize,
}

/// Edge and cluster counts at each threshold; scores are computed once.
pub fn tau_sweep(refs: &DescriptorSet, bg: &BackgroundSet, taus: &[f64], cfg: &DedupConfig) -> Result<Vec<SweepPoint>> {
    if taus.iter().any(|t| t.is_nan()) {
        return Err(Error::Config("sweep contains NaN".into()));
    }
    let floor = taus.iter().copied().fold(f64::INFINITY, f64::min);
    if taus.is_empty() {
        return Ok(Vec::new());
    }
    let pairs = mutual_pairs(refs, bg, floor, cfg)?;
    Ok(taus
        .iter()
        .map(|&tau| {
            let kept: Vec<MutualPair> = pairs.iter().filter(|p| p.min() > tau).copied().collect();
            let rep = report_from_pairs(refs, bg, tau, &kept);
            SweepPoint {
                tau,
                edges: kept.len(),
                clusters: rep.clusters.len(),
                clustered_clips: rep.clusters.iter().map(|c| c.members.len()).sum(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCount {
    pub size: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ClusterRecord {
    Config {
        corpus_id: String,
        tau: f64,
        k: usize,
        beta: f64,
        clip_count: usize,
        edge_count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pipeline: Option<serde_json::Value>,
    },
    Cluster {
        #[serde(flatten)]
        cluster: DuplicateCluster,
    },
    SizeSummary {
        sizes: Vec<SizeCount>,
    },
    Sweep {
        #[serde(flatten)]
        point: SweepPoint,
    },
}

/// Line-delimited report: `config`, one `cluster` per cluster, then
/// `size_summary`.
pub fn write_jsonl<W: Write>(report: &ClusterReport, pipeline: Option<&serde_json::Value>, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<cluster output>", e);
    let mut emit = |rec: &ClusterRecord| writeln!(w, "{}", serde_json::to_string(rec).expect("serializable")).map_err(io);
    emit(&ClusterRecord::Config {
        corpus_id: report.corpus_id.clone(),
        tau: report.tau,
        k: report.k,
        beta: report.beta,
        clip_count: report.clip_count,
        edge_count: report.edge_count,
        pipeline: pipeline.cloned(),
    })?;
    for c in &report.clusters {
        emit(&ClusterRecord::Cluster { cluster: c.clone() })?;
    }
    emit(&ClusterRecord::SizeSummary {
        sizes: report
            .size_summary
            .iter()
            .map(|(&size, &count)| SizeCount { size, count })
            .collect(),
    })
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<ClusterReport> {
    let mut report = None;
    let mut clusters = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<cluster input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClusterRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format("cluster report", format!("line {}: {e}", lineno + 1)))?;
        match rec {
            ClusterRecord::Config {
                corpus_id,
                tau,
                k,
                beta,
                clip_count,
                edge_count,
                ..
            } => {
                report = Some(ClusterReport {
                    corpus_id,
                    tau,
                    k,
                    beta,
                    clip_count,
                    edge_count,
                    clusters: Vec::new(),
                    size_summary: BTreeMap::new(),
                })
            }
            ClusterRecord::Cluster { cluster } => clusters.push(cluster),
            ClusterRecord::SizeSummary { .. } | ClusterRecord::Sweep { .. } => {}
        }
    }
    let mut report = report.ok_or_else(|| Error::format("cluster report", "missing config record"))?;
    for c in &clusters {
        *report.size_summary.entry(c.members.len()).or_insert(0) += 1;
    }
    report.clusters = clusters;
    Ok(report)
}
