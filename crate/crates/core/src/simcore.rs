//! Cosine similarity, background-bias normalization and exact top-k search.
//!
//! The normalized score of a query `q` against a reference `r` is
//! `cos(q, r) - beta * bias(q)`, where `bias(q)` is the mean cosine between
//! `q` and its `K` nearest background descriptors. The bias depends only on
//! the query, so the score is asymmetric and per-query rankings are the raw
//! cosine rankings.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClipId, DescriptorSet};
use crate::error::{Error, Result};
use crate::exec;

/// Vectors with a norm below this score 0 against everything.
pub const DEGENERATE_NORM: f64 = 1e-12;

pub const DEFAULT_BLOCK: usize = 64;

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] as f64 * y[0] as f64;
        acc[1] += x[1] as f64 * y[1] as f64;
        acc[2] += x[2] as f64 * y[2] as f64;
        acc[3] += x[3] as f64 * y[3] as f64;
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        sum += *x as f64 * *y as f64;
    }
    sum
}

pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn cos_from(dot: f64, na: f64, nb: f64) -> f64 {
    if na < DEGENERATE_NORM || nb < DEGENERATE_NORM {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn cosine(q: &[f32], r: &[f32]) -> Result<f64> {
    if q.len() != r.len() {
        return Err(Error::contract(format!(
            "cosine of vectors with dims {} and {}",
            q.len(),
            r.len()
        )));
    }
    Ok(cos_from(dot(q, r), norm(q), norm(r)))
}

/// A descriptor set with per-row norms and a lexicographic id rank used
/// to break score ties.
#[derive(Debug, Clone)]
pub(crate) struct Indexed<'a> {
    pub set: &'a DescriptorSet,
    pub norms: Vec<f64>,
    pub id_rank: Vec<u32>,
}

impl<'a> Indexed<'a> {
    pub fn new(set: &'a DescriptorSet) -> Self {
        let norms = exec::map_range(set.len(), |i| norm(set.row(i)));
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_by(|&a, &b| set.id(a).cmp(set.id(b)));
        let mut id_rank = vec![0u32; set.len()];
        for (rank, &i) in order.iter().enumerate() {
            id_rank[i] = rank as u32;
        }
        Indexed { set, norms, id_rank }
    }

    #[inline]
    pub fn cos(&self, i: usize, q: &[f32], q_norm: f64) -> f64 {
        cos_from(dot(q, self.set.row(i)), q_norm, self.norms[i])
    }
}

/// A search candidate; `Ord` puts the better candidate last (higher score,
/// then smaller id rank).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    score: f64,
    id_rank: u32,
    idx: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id_rank.cmp(&self.id_rank))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` best candidates seen so far.
struct TopK {
    k: usize,
    heap: BinaryHeap<Reverse<Cand>>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, c: Cand) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(c));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if c > *worst {
                self.heap.pop();
                self.heap.push(Reverse(c));
            }
        }
    }

    /// Best first.
    fn into_sorted(self) -> Vec<Cand> {
        let mut v: Vec<Cand> = self.heap.into_iter().map(|Reverse(c)| c).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}

/// Background descriptors used to estimate each query's similarity bias.
#[derive(Debug, Clone)]
pub struct BackgroundSet {
    descriptors: DescriptorSet,
    k: usize,
    beta: f64,
    norms: Vec<f64>,
    id_rank: Vec<u32>,
}

impl BackgroundSet {
    pub fn new(descriptors: DescriptorSet, k: usize, beta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::contract("background K must be at least 1"));
        }
        if !beta.is_finite() {
            return Err(Error::contract(format!("beta must be finite, got {beta}")));
        }
        if descriptors.len() < k {
            return Err(Error::contract(format!(
                "background set has {} descriptors, fewer than K = {k}",
                descriptors.len()
            )));
        }
        let Indexed { norms, id_rank, .. } = Indexed::new(&descriptors);
        Ok(BackgroundSet {
            descriptors,
            k,
            beta,
            norms,
            id_rank,
        })
    }

    pub fn descriptors(&self) -> &DescriptorSet {
        &self.descriptors
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// The `K` nearest background members of `q`, best first, as
    /// `(row, cosine)`. Equal cosines are ordered by clip id.
    pub fn neighbors(&self, q: &[f32]) -> Result<Vec<(usize, f64)>> {
        self.check_dim(q)?;
        Ok(self.neighbors_normed(q, norm(q)))
    }

    fn neighbors_normed(&self, q: &[f32], q_norm: f64) -> Vec<(usize, f64)> {
        let mut top = TopK::new(self.k);
        for i in 0..self.descriptors.len() {
            let score = cos_from(dot(q, self.descriptors.row(i)), q_norm, self.norms[i]);
            top.offer(Cand {
                score,
                id_rank: self.id_rank[i],
                idx: i as u32,
            });
        }
        top.into_sorted()
            .into_iter()
            .map(|c| (c.idx as usize, c.score))
            .collect()
    }

    pub fn bias(&self, q: &[f32]) -> Result<f64> {
        self.check_dim(q)?;
        Ok(self.bias_normed(q, norm(q)))
    }

    pub(crate) fn bias_normed(&self, q: &[f32], q_norm: f64) -> f64 {
        let nn = self.neighbors_normed(q, q_norm);
        nn.iter().map(|(_, s)| s).sum::<f64>() / self.k as f64
    }

    fn check_dim(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.descriptors.dim() {
            return Err(Error::contract(format!(
                "query dim {} does not match background dim {}",
                q.len(),
                self.descriptors.dim()
            )));
        }
        Ok(())
    }

    /// Checks kind/dim compatibility and id disjointness with `set`.
    pub(crate) fn check_compatible(&self, set: &DescriptorSet, role: &str) -> Result<()> {
        if set.kind() != self.descriptors.kind() || set.dim() != self.descriptors.dim() {
            return Err(Error::contract(format!(
                "{role} set is {}/{}, background is {}/{}",
                set.kind(),
                set.dim(),
                self.descriptors.kind(),
                self.descriptors.dim()
            )));
        }
        let shared: Vec<&ClipId> = set
            .ids()
            .iter()
            .filter(|id| self.descriptors.position(id).is_some())
            .take(5)
            .collect();
        if !shared.is_empty() {
            return Err(Error::contract(format!(
                "background shares clip ids with the {role} set: {}",
                shared.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(())
    }
}

pub fn normalized_score(q: &[f32], r: &[f32], bg: &BackgroundSet) -> Result<f64> {
    let raw = cosine(q, r)?;
    let bias = bg.bias(q)?;
    Ok(raw - bg.beta() * bias)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMatch {
    pub query: ClipId,
    pub reference: ClipId,
    pub raw: f64,
    pub bias: f64,
    pub normalized: f64,
    pub rank: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopkOptions {
    pub k: usize,
    pub block_size: usize,
    /// Skip reference rows whose clip id equals the query's.
    pub exclude_self: bool,
}

impl TopkOptions {
    pub fn new(k: usize) -> Self {
        TopkOptions {
            k,
            block_size: DEFAULT_BLOCK,
            exclude_self: false,
        }
    }
}

/// Exact top-`k` references per query by normalized score.
pub fn topk(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    bg: &BackgroundSet,
    k: usize,
) -> Result<Vec<Vec<ScoredMatch>>> {
    topk_with(queries, refs, bg, &TopkOptions::new(k))
}

/// Blocked evaluation: queries are processed in parallel blocks, and each
/// block sweeps the references block by block keeping a bounded heap per
/// query. Ranking uses the raw cosine (the bias is constant per query), with
/// ties broken by reference clip id.
pub fn topk_with(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    bg: &BackgroundSet,
    opts: &TopkOptions,
) -> Result<Vec<Vec<ScoredMatch>>> {
    if opts.k == 0 {
        return Err(Error::contract("top-k needs k >= 1"));
    }
    if queries.kind() != refs.kind() || queries.dim() != refs.dim() {
        return Err(Error::contract(format!(
            "query set is {}/{}, reference set is {}/{}",
            queries.kind(),
            queries.dim(),
            refs.kind(),
            refs.dim()
        )));
    }
    bg.check_compatible(queries, "query")?;
    bg.check_compatible(refs, "reference")?;

    let block = opts.block_size.max(1);
    let refs_ix = Indexed::new(refs);
    let q_ix = Indexed::new(queries);
    let k = opts.k.min(refs.len());
    let n_blocks = queries.len().div_ceil(block);

    let per_block = exec::map_range(n_blocks, |b| {
        let q_range = b * block..((b + 1) * block).min(queries.len());
        let mut heaps: Vec<TopK> = q_range.clone().map(|_| TopK::new(k)).collect();
        for r_start in (0..refs.len()).step_by(block) {
            let r_end = (r_start + block).min(refs.len());
            for (h, qi) in heaps.iter_mut().zip(q_range.clone()) {
                let q = queries.row(qi);
                let q_id = queries.id(qi);
                for ri in r_start..r_end {
                    if opts.exclude_self && refs.id(ri) == q_id {
                        continue;
                    }
                    h.offer(Cand {
                        score: refs_ix.cos(ri, q, q_ix.norms[qi]),
                        id_rank: refs_ix.id_rank[ri],
                        idx: ri as u32,
                    });
                }
            }
        }
        heaps
            .into_iter()
            .zip(q_range)
            .map(|(h, qi)| {
                let bias = bg.bias_normed(queries.row(qi), q_ix.norms[qi]);
                h.into_sorted()
                    .into_iter()
                    .enumerate()
                    .map(|(rank, c)| ScoredMatch {
                        query: queries.id(qi).clone(),
                        reference: refs.id(c.idx as usize).clone(),
                        raw: c.score,
                        bias,
                        normalized: c.score - bg.beta() * bias,
                        rank: rank as u32 + 1,
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    Ok(per_block.into_iter().flatten().collect())
}

/// Dense `n x n` matrix of normalized scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    ids: Vec<ClipId>,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(ids: Vec<ClipId>, data: Vec<f64>) -> Result<Self> {
        if data.len() != ids.len() * ids.len() {
            return Err(Error::contract(format!(
                "score matrix for {} ids needs {} entries, got {}",
                ids.len(),
                ids.len() * ids.len(),
                data.len()
            )));
        }
        Ok(ScoreMatrix { ids, data })
    }

    pub fn from_rows(ids: Vec<ClipId>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::contract(format!(
                "score matrix is not square ({} ids, {} rows)",
                n,
                rows.len()
            )));
        }
        ScoreMatrix::new(ids, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[ClipId] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n()..(i + 1) * self.n()]
    }
}

/// Per-row bias of every descriptor in `set`.
pub fn row_biases(set: &DescriptorSet, bg: &BackgroundSet) -> Result<Vec<f64>> {
    bg.check_compatible(set, "reference")?;
    Ok(exec::map_range(set.len(), |i| {
        let row = set.row(i);
        bg.bias_normed(row, norm(row))
    }))
}

/// Pairwise normalized self-similarity with a zeroed diagonal:
/// `S[i][j] = cos(r_i, r_j) - beta * bias(r_i)`.
pub fn self_similarity(refs: &DescriptorSet, bg: &BackgroundSet) -> Result<ScoreMatrix> {
    self_similarity_blocked(refs, bg, DEFAULT_BLOCK)
}

pub fn self_similarity_blocked(
    refs: &DescriptorSet,
    bg: &BackgroundSet,
    block_rows: usize,
) -> Result<ScoreMatrix> {
    if refs.is_empty() {
        return Err(Error::contract("self-similarity of an empty set"));
    }
    let biases = row_biases(refs, bg)?;
    let ix = Indexed::new(refs);
    let n = refs.len();
    let mut data = vec![0.0f64; n * n];
    let block_rows = block_rows.max(1);
    exec::for_each_chunk_mut(&mut data, n * block_rows, |start, chunk| {
        let first_row = start / n;
        for (o, row) in chunk.chunks_exact_mut(n).enumerate() {
            let i = first_row + o;
            let q = refs.row(i);
            let shift = bg.beta() * biases[i];
            for (j, s) in row.iter_mut().enumerate() {
                *s = if i == j { 0.0 } else { ix.cos(j, q, ix.norms[i]) - shift };
            }
        }
    });
    ScoreMatrix::new(refs.ids().to_vec(), data)
}
