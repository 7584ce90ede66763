use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Stochastic block model G(n, k, p, q) with contiguous equal-size blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.n % self.k != 0 {
            return Err(Error::Parameter(format!(
                "n = {} must be a positive multiple of k = {}",
                self.n, self.k
            )));
        }
        for (name, x) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Parameter(format!("{name} = {x} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.n / self.k
    }

    pub fn community(&self, i: usize) -> usize {
        i * self.k / self.n
    }
}

/// Edge probabilities that give expected intra-degree `h·d` and inter-degree `(1−h)·d`.
pub fn sbm_from_homophily(n: usize, k: usize, avg_degree: f64, h: f64) -> Result<SbmParams> {
    if k == 0 || n == 0 || n % k != 0 {
        return Err(Error::Parameter(format!("n = {n} must be a positive multiple of k = {k}")));
    }
    if !(0.0..=1.0).contains(&h) || !(avg_degree >= 0.0) {
        return Err(Error::Parameter(format!("h = {h}, avg_degree = {avg_degree}")));
    }
    let block = (n / k) as f64;
    let intra = h * avg_degree;
    let inter = (1.0 - h) * avg_degree;
    let p = if intra == 0.0 { 0.0 } else { intra / (block - 1.0) };
    let q = if inter == 0.0 { 0.0 } else { inter / (n as f64 - block) };
    let params = SbmParams { n, k, p, q };
    if !p.is_finite() || !q.is_finite() {
        return Err(Error::Parameter(format!(
            "degree {avg_degree} at h = {h} is not realizable with n = {n}, k = {k}"
        )));
    }
    params.validate()?;
    Ok(params)
}

/// Samples an SBM graph. Pairs are visited by geometric skipping, so the
/// cost is proportional to the number of edges plus the number of rows.
pub fn sbm_generate(params: &SbmParams, seed: u64) -> Result<Graph> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = params.block_size();
    let mut edges = Vec::new();
    for a in 0..params.k {
        for b in a..params.k {
            let prob = if a == b { params.p } else { params.q };
            let base_a = a * s;
            let base_b = b * s;
            if a == b {
                // row r of the upper triangle holds columns r+1..s
                sample_rows(&mut rng, prob, s, |r| s - r - 1, |r, c| {
                    edges.push((base_a + r, base_a + r + 1 + c))
                });
            } else {
                sample_rows(&mut rng, prob, s, |_| s, |r, c| edges.push((base_a + r, base_b + c)));
            }
        }
    }
    let labels = (0..params.n).map(|i| params.community(i)).collect();
    Graph::from_edges(params.n, &edges)?.with_labels(labels)
}

fn sample_rows<R: Rng>(
    rng: &mut R,
    prob: f64,
    rows: usize,
    row_len: impl Fn(usize) -> usize,
    mut emit: impl FnMut(usize, usize),
) {
    if prob <= 0.0 {
        return;
    }
    if prob >= 1.0 {
        for r in 0..rows {
            for c in 0..row_len(r) {
                emit(r, c);
            }
        }
        return;
    }
    let log_q = (1.0 - prob).ln();
    let mut row = 0;
    let mut col = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        let mut skip = if skip > 1e15 { usize::MAX / 2 } else { skip as usize };
        loop {
            if row >= rows {
                return;
            }
            let remaining = row_len(row) - col.min(row_len(row));
            if skip < remaining {
                col += skip;
                break;
            }
            skip -= remaining;
            row += 1;
            col = 0;
        }
        emit(row, col);
        col += 1;
    }
}

/// Preferential attachment with class compatibility.
#[derive(Debug, Clone, PartialEq)]
pub struct PaParams {
    pub n: usize,
    pub k: usize,
    pub m_edges: usize,
    pub compat: Array2<f64>,
}

impl PaParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_edges == 0 {
            return Err(Error::Parameter("m_edges must be at least 1".into()));
        }
        if self.k == 0 || self.compat.dim() != (self.k, self.k) {
            return Err(Error::Parameter(format!(
                "compatibility matrix must be {0}x{0}",
                self.k
            )));
        }
        if self.compat.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Parameter("compatibilities must be finite and nonnegative".into()));
        }
        for (i, row) in self.compat.rows().into_iter().enumerate() {
            if !row.iter().any(|&x| x > 0.0) {
                return Err(Error::Parameter(format!("compatibility row {i} has no positive entry")));
            }
        }
        if self.n < self.m_edges + 1 {
            return Err(Error::Parameter(format!(
                "n = {} smaller than the seed clique of {} nodes",
                self.n,
                self.m_edges + 1
            )));
        }
        Ok(())
    }
}

const PA_RESAMPLE_LIMIT: usize = 100;

/// Grows a graph node by node. A new node of class `i` attaches each of its
/// `m_edges` edges to an existing node `v` of class `j` with probability
/// proportional to `H[i, j]·deg(v)`. The process starts from a clique on
/// `m_edges + 1` nodes labelled round-robin.
pub fn pa_generate(params: &PaParams, label_dist: &[f64], seed: u64) -> Result<Graph> {
    params.validate()?;
    let k = params.k;
    if label_dist.len() != k || label_dist.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Parameter("label distribution must have k nonnegative entries".into()));
    }
    let label_total: f64 = label_dist.iter().sum();
    if !(label_total > 0.0) {
        return Err(Error::Parameter("label distribution sums to zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n;
    let m0 = params.m_edges + 1;

    let mut labels = Vec::with_capacity(n);
    let mut edges = Vec::new();
    // endpoints[c] lists every edge endpoint of class c; sampling uniformly
    // from it is sampling a class-c node proportionally to its degree
    let mut endpoints: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..m0 {
        labels.push(i % k);
    }
    for u in 0..m0 {
        for v in u + 1..m0 {
            edges.push((u, v));
            endpoints[labels[u]].push(u);
            endpoints[labels[v]].push(v);
        }
    }

    let mut chosen = Vec::with_capacity(params.m_edges);
    let mut weights = vec![0.0; k];
    for v in m0..n {
        let c = sample_index(&mut rng, label_dist, label_total);
        labels.push(c);
        for j in 0..k {
            weights[j] = params.compat[[c, j]] * endpoints[j].len() as f64;
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Generation(format!(
                "no eligible attachment target for node {v} of class {c}"
            )));
        }
        chosen.clear();
        for _ in 0..params.m_edges {
            for _ in 0..PA_RESAMPLE_LIMIT {
                let j = sample_index(&mut rng, &weights, total);
                let list = &endpoints[j];
                let target = list[rng.random_range(0..list.len())];
                if !chosen.contains(&target) {
                    chosen.push(target);
                    break;
                }
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints[labels[t]].push(t);
        }
        for _ in 0..chosen.len() {
            endpoints[c].push(v);
        }
    }
    Graph::from_edges(n, &edges)?.with_labels(labels)
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut t = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if t < w {
                return i;
            }
            t -= w;
        }
    }
    last
}
