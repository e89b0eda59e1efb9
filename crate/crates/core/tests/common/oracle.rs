//! Brute-force reference implementations. Plain loops, full sorts, no
//! blocking and no shared code with the library's search path.

use std::collections::{BTreeSet, VecDeque};

use rustfft::num_complex::Complex;

pub fn cos(a: &[f32], b: &[f32]) -> f64 {
    let mut d = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        d += a[i] as f64 * b[i] as f64;
        na += a[i] as f64 * a[i] as f64;
        nb += b[i] as f64 * b[i] as f64;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        d / (na * nb)
    }
}

/// Mean of the `k` largest cosines against `bg` (ties by id).
pub fn bias(q: &[f32], bg: &[(String, Vec<f32>)], k: usize) -> f64 {
    let mut all: Vec<(f64, &str)> = bg.iter().map(|(id, v)| (cos(q, v), id.as_str())).collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    all[..k].iter().map(|x| x.0).sum::<f64>() / k as f64
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub reference: String,
    pub raw: f64,
    pub normalized: f64,
}

/// Every reference for every query, sorted by normalized score then id,
/// truncated to `k`.
pub fn topk(
    queries: &[(String, Vec<f32>)],
    refs: &[(String, Vec<f32>)],
    bg: &[(String, Vec<f32>)],
    k_bg: usize,
    beta: f64,
    k: usize,
) -> Vec<Vec<Hit>> {
    queries
        .iter()
        .map(|(_, q)| {
            let b = bias(q, bg, k_bg);
            let mut hits: Vec<Hit> = refs
                .iter()
                .map(|(id, r)| {
                    let raw = cos(q, r);
                    Hit {
                        reference: id.clone(),
                        raw,
                        normalized: raw - beta * b,
                    }
                })
                .collect();
            hits.sort_by(|a, b| {
                b.normalized
                    .partial_cmp(&a.normalized)
                    .unwrap()
                    .then(a.reference.cmp(&b.reference))
            });
            hits.truncate(k);
            hits
        })
        .collect()
}

pub fn self_similarity(refs: &[(String, Vec<f32>)], bg: &[(String, Vec<f32>)], k_bg: usize, beta: f64) -> Vec<Vec<f64>> {
    let n = refs.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        let b = bias(&refs[i].1, bg, k_bg);
        for j in 0..n {
            if i != j {
                s[i][j] = cos(&refs[i].1, &refs[j].1) - beta * b;
            }
        }
    }
    s
}

pub fn adjacency(s: &[Vec<f64>], tau: f64) -> Vec<(usize, usize)> {
    let n = s.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i < j && s[i][j] > tau && s[j][i] > tau {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Connected components with at least two nodes, by breadth-first search.
pub fn bfs_components(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.insert(v);
                    queue.push_back(v);
                }
            }
        }
        if comp.len() >= 2 {
            out.insert(comp);
        }
    }
    out
}

/// Direct DFT of STFT frame `t` (centered, reflect-padded, periodic Hann).
pub struct DftOracle {
    n: usize,
    hop: usize,
    window: Vec<f64>,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

impl DftOracle {
    pub fn new(n: usize, hop: usize) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        DftOracle {
            n,
            hop,
            window: (0..n).map(|i| 0.5 - 0.5 * (tau * i as f64 / n as f64).cos()).collect(),
            cos_table: (0..n).map(|i| (tau * i as f64 / n as f64).cos()).collect(),
            sin_table: (0..n).map(|i| -(tau * i as f64 / n as f64).sin()).collect(),
        }
    }

    pub fn frame(&self, signal: &[f32], t: usize) -> Vec<Complex<f64>> {
        let len = signal.len() as isize;
        let half = (self.n / 2) as isize;
        let framed: Vec<f64> = (0..self.n)
            .map(|i| {
                let mut j = (t * self.hop + i) as isize - half;
                if j < 0 {
                    j = -j;
                } else if j >= len {
                    j = 2 * (len - 1) - j;
                }
                self.window[i] * signal[j as usize] as f64
            })
            .collect();
        (0..=self.n / 2)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (i, &x) in framed.iter().enumerate() {
                    let idx = (k * i) % self.n;
                    re += x * self.cos_table[idx];
                    im += x * self.sin_table[idx];
                }
                Complex::new(re, im)
            })
            .collect()
    }
}
