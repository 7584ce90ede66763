//! Community recovery from Laplacian eigenvectors, permutation-aligned
//! scoring, and the expected SBM Laplacian.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encodings::{llpe_forward, LlpeParams};
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, Graph, SbmParams};
use crate::spectral::{operator_norm, LinearOperator, SpectralDecomposition};

pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;
const EXHAUSTIVE_MAX_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!("label {bad} outside [0, {k})")));
        }
        Ok(Partition { labels, k })
    }

    /// Ground-truth blocks of an SBM.
    pub fn from_sbm(params: &SbmParams) -> Self {
        Partition {
            labels: (0..params.n).map(|i| params.community(i)).collect(),
            k: params.k,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub misclassified: usize,
    pub accuracy: f64,
    /// `permutation[predicted] = true label`.
    pub permutation: Vec<usize>,
}

/// Which vectors to cluster.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Eigenvectors `1..k` (skipping the trivial one).
    FirstNontrivial,
    /// The last `k − 1` eigenvectors.
    Last,
    /// The single top eigenvector; only meaningful with [`ClusterMethod::Sign`].
    SignOfLast,
    /// Rows of an LLPE encoding.
    Llpe(LlpeParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMethod {
    Sign,
    KMeans,
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(ClusterMethod::Sign),
            "kmeans" => Ok(ClusterMethod::KMeans),
            _ => Err(Error::Config(format!("unknown cluster method {s:?}"))),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::Sign => "sign",
            ClusterMethod::KMeans => "kmeans",
        })
    }
}

/// Clusters the nodes into `k` groups using the selected spectral embedding.
pub fn spectral_partition(
    spectrum: &SpectralDecomposition,
    selector: &Selector,
    k: usize,
    method: ClusterMethod,
    seed: u64,
) -> Result<Partition> {
    if k < 2 {
        return Err(Error::Parameter(format!("need k ≥ 2 clusters, got {k}")));
    }
    let owned;
    let embedding: ArrayView2<f64> = match selector {
        Selector::FirstNontrivial => spectrum.first_nontrivial(k - 1)?,
        Selector::Last => spectrum.last(k - 1)?,
        Selector::SignOfLast => spectrum.last(1)?,
        Selector::Llpe(theta) => {
            owned = llpe_forward(spectrum, theta);
            owned.view()
        }
    };
    match method {
        ClusterMethod::Sign => {
            if k != 2 {
                return Err(Error::Config(format!("sign clustering needs k = 2, got {k}")));
            }
            if embedding.ncols() != 1 {
                return Err(Error::Config(format!(
                    "sign clustering needs one vector, selector gives {}",
                    embedding.ncols()
                )));
            }
            let labels = embedding.column(0).iter().map(|&v| usize::from(v < 0.0)).collect();
            Ok(Partition { labels, k })
        }
        ClusterMethod::KMeans => {
            let labels = kmeans(embedding, k, KMEANS_RESTARTS, seed)?;
            Ok(Partition { labels, k })
        }
    }
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia is kept. Restarts that end with an empty cluster are discarded.
pub fn kmeans(data: ArrayView2<f64>, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("cannot form {k} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        if let Some((inertia, labels)) = lloyd(data, k, &mut rng) {
            if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
                best = Some((inertia, labels));
            }
        }
    }
    best.map(|(_, l)| l)
        .ok_or_else(|| Error::Clustering(format!("all {restarts} k-means restarts left an empty cluster")))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.nrows();
    let row = |i: usize| data.row(i).to_vec();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(&row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(&row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Option<(f64, Vec<usize>)> {
    let (n, dim) = data.dim();
    let mut centers = plus_plus(data, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let x = data.row(i);
            let x = x.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| x.to_vec());
            let (arg, _) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(&x, ctr)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            if *label != arg {
                *label = arg;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((c, s), &cnt) in centers.iter_mut().zip(sums).zip(&counts) {
            *c = s.into_iter().map(|v| v / cnt as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(&data.row(i).to_vec(), &centers[l]))
        .sum();
    Some((inertia, labels))
}

/// Minimum misclassification count over relabelings of `pred`.
pub fn align_errors(pred: &Partition, truth: &Partition) -> Result<RecoveryReport> {
    if pred.k != truth.k {
        return Err(Error::Config(format!("partitions have {} and {} clusters", pred.k, truth.k)));
    }
    if pred.n() != truth.n() {
        return Err(Error::Config(format!("partitions cover {} and {} nodes", pred.n(), truth.n())));
    }
    let k = pred.k;
    let n = pred.n();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        confusion[p][t] += 1;
    }
    let permutation = if k <= EXHAUSTIVE_MAX_K {
        best_permutation_exhaustive(&confusion)
    } else {
        hungarian_max(&confusion)
    };
    let matched: usize = permutation.iter().enumerate().map(|(p, &t)| confusion[p][t]).sum();
    let misclassified = n - matched;
    let accuracy = if n == 0 { 1.0 } else { 1.0 - misclassified as f64 / n as f64 };
    Ok(RecoveryReport { misclassified, accuracy, permutation })
}

fn best_permutation_exhaustive(confusion: &[Vec<usize>]) -> Vec<usize> {
    let k = confusion.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_score = 0;
    let mut first = true;
    // Heap's algorithm
    let mut c = vec![0usize; k];
    let score = |p: &[usize]| -> usize { p.iter().enumerate().map(|(i, &t)| confusion[i][t]).sum() };
    let mut consider = |p: &[usize]| {
        let s = score(p);
        if first || s > best_score {
            best_score = s;
            best = p.to_vec();
            first = false;
        }
    };
    consider(&perm);
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            consider(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method on
/// negated weights).
fn hungarian_max(weights: &[Vec<usize>]) -> Vec<usize> {
    let k = weights.len();
    let big = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| big - weights[i][j] as i64;
    // potentials and matching use 1-based indexing with a dummy column 0
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; k];
    for j in 1..=k {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

fn check_model(params: &SbmParams) -> Result<f64> {
    params.validate()?;
    if params.p == 0.0 && params.q == 0.0 {
        return Err(Error::DegenerateModel("p = q = 0 has no edges".into()));
    }
    let b = params.block_size() as f64;
    Ok(params.p * b + params.q * (params.n as f64 - b))
}

/// `E[L] = I − E[A]/d̄` with `E[A]` block-constant (`p` within blocks,
/// including the diagonal, `q` across) and `d̄ = p·n/k + q·(n − n/k)`.
pub fn expected_laplacian(params: &SbmParams) -> Result<Array2<f64>> {
    let d = check_model(params)?;
    let (pl, ql) = (params.p / d, params.q / d);
    Ok(Array2::from_shape_fn((params.n, params.n), |(i, j)| {
        let a = if params.community(i) == params.community(j) { pl } else { ql };
        if i == j {
            1.0 - a
        } else {
            -a
        }
    }))
}

/// Closed-form eigenvalues of [`expected_laplacian`] with multiplicities:
/// `0` once, `1` with multiplicity `n − k`, `kq/(p + (k−1)q)` with
/// multiplicity `k − 1`.
pub fn expected_spectrum(params: &SbmParams) -> Result<Vec<(f64, usize)>> {
    check_model(params)?;
    let (n, k) = (params.n, params.k);
    let kf = k as f64;
    let mut out = vec![(0.0, 1)];
    if n > k {
        out.push((1.0, n - k));
    }
    if k > 1 {
        out.push((kf * params.q / (params.p + (kf - 1.0) * params.q), k - 1));
    }
    Ok(out)
}

/// `E[L]` applied in `O(n)` using block sums.
pub struct ExpectedLaplacianOp {
    params: SbmParams,
    pl: f64,
    ql: f64,
}

impl ExpectedLaplacianOp {
    pub fn new(params: &SbmParams) -> Result<Self> {
        let d = check_model(params)?;
        Ok(ExpectedLaplacianOp { params: *params, pl: params.p / d, ql: params.q / d })
    }
}

impl LinearOperator for ExpectedLaplacianOp {
    fn dim(&self) -> usize {
        self.params.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut block = vec![0.0; self.params.k];
        for (i, &v) in x.iter().enumerate() {
            block[self.params.community(i)] += v;
        }
        let total: f64 = block.iter().sum();
        for (i, yi) in y.iter_mut().enumerate() {
            let b = block[self.params.community(i)];
            *yi = x[i] - self.pl * b - self.ql * (total - b);
        }
    }
}

struct Difference<'a> {
    a: &'a dyn LinearOperator,
    b: &'a dyn LinearOperator,
}

impl LinearOperator for Difference<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        for (yi, t) in y.iter_mut().zip(tmp) {
            *yi -= t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub observed: f64,
    pub bound: f64,
    pub holds: bool,
    pub min_degree: usize,
}

/// `14·√(ln(4n/δ)/min_degree)`; infinite for `δ = 0`.
pub fn concentration_bound(n: usize, min_degree: usize, delta: f64) -> f64 {
    if delta <= 0.0 || min_degree == 0 {
        return f64::INFINITY;
    }
    14.0 * ((4.0 * n as f64 / delta).ln() / min_degree as f64).sqrt()
}

const NORM_TOL: f64 = 1e-6;
const NORM_MAX_ITER: usize = 20_000;

/// `‖E[L] − L‖₂` for a given Laplacian operator, compared with the bound.
pub fn concentration_check_operator(
    laplacian: &dyn LinearOperator,
    params: &SbmParams,
    min_degree: usize,
    delta: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if laplacian.dim() != params.n {
        return Err(Error::Parameter(format!("operator has dimension {}, model has {}", laplacian.dim(), params.n)));
    }
    let expected = ExpectedLaplacianOp::new(params)?;
    let diff = Difference { a: &expected, b: laplacian };
    let observed = operator_norm(&diff, NORM_TOL, NORM_MAX_ITER, seed)?;
    let bound = concentration_bound(params.n, min_degree, delta);
    Ok(ConcentrationReport { observed, bound, holds: observed <= bound, min_degree })
}

/// Spectral-norm deviation of a sampled SBM Laplacian from its expectation.
pub fn concentration_check(graph: &Graph, params: &SbmParams, delta: f64) -> Result<ConcentrationReport> {
    let min_degree = graph.min_degree();
    if min_degree == 0 {
        return Err(Error::Parameter("graph has isolated nodes".into()));
    }
    let l = normalized_laplacian(graph);
    concentration_check_operator(&l, params, min_degree, delta, 0)
}
