//! Spectral graph distances `f_r(i,j)² = Σ_k r(λ_k)(u_k[i] − u_k[j])²`, the
//! bump-filter LLPE construction that reproduces them, and a random-walk
//! commute-time estimator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{cheb_fit, ChebyshevSeries, FitMethod};
use crate::encodings::LlpeParams;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{normalize_eigenvalues, SpectralDecomposition, ZERO_EIGENVALUE};

/// Default bump sharpness.
pub const DEFAULT_C_MAX: f64 = 200.0;

/// Weight `r(λ)` applied to each eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpectralKernel {
    /// `1/λ²`
    Commute,
    /// `e^{−2tλ}`
    Diffusion { t: f64 },
    /// `1/λ`
    Biharmonic,
    /// `e^{−2t(2−λ)}`, increasing in λ.
    HighPass { t: f64 },
    /// A series in `λ̃ = λ − 1`.
    Custom { series: ChebyshevSeries },
}

impl SpectralKernel {
    pub fn is_singular(&self) -> bool {
        matches!(self, SpectralKernel::Commute | SpectralKernel::Biharmonic)
    }

    /// `r(λ)`, or `None` for singular kernels at eigenvalues below the
    /// zero threshold (those terms are left out of the sum).
    pub fn weight(&self, lambda: f64) -> Result<Option<f64>> {
        if self.is_singular() && lambda < ZERO_EIGENVALUE {
            return Ok(None);
        }
        let r = match self {
            SpectralKernel::Commute => 1.0 / (lambda * lambda),
            SpectralKernel::Biharmonic => 1.0 / lambda,
            SpectralKernel::Diffusion { t } => (-2.0 * t * lambda).exp(),
            SpectralKernel::HighPass { t } => (-2.0 * t * (2.0 - lambda)).exp(),
            SpectralKernel::Custom { series } => series.eval(lambda - 1.0)?,
        };
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Kernel(format!("{self} evaluates to {r} at λ = {lambda}")));
        }
        Ok(Some(r))
    }

    /// Weights for every stored eigenvalue, 0 for excluded ones.
    pub fn weights(&self, spectrum: &SpectralDecomposition) -> Result<Vec<f64>> {
        spectrum
            .eigenvalues
            .iter()
            .map(|&l| Ok(self.weight(l)?.unwrap_or(0.0)))
            .collect()
    }
}

impl fmt::Display for SpectralKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralKernel::Commute => write!(f, "commute"),
            SpectralKernel::Biharmonic => write!(f, "biharmonic"),
            SpectralKernel::Diffusion { t } => write!(f, "diffusion:{t}"),
            SpectralKernel::HighPass { t } => write!(f, "highpass:{t}"),
            SpectralKernel::Custom { series } => {
                let c: Vec<String> = series.coeffs().iter().map(|c| c.to_string()).collect();
                write!(f, "custom:{}", c.join(","))
            }
        }
    }
}

impl FromStr for SpectralKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("kernel {s:?}: {msg}"));
        let (head, arg) = match s.trim().split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let time = |arg: Option<&str>| -> Result<f64> {
            let t: f64 = arg
                .ok_or_else(|| bad("missing t"))?
                .parse()
                .map_err(|_| bad("t is not a number"))?;
            if t > 0.0 && t.is_finite() {
                Ok(t)
            } else {
                Err(bad("t must be positive"))
            }
        };
        match head {
            "commute" if arg.is_none() => Ok(SpectralKernel::Commute),
            "biharmonic" if arg.is_none() => Ok(SpectralKernel::Biharmonic),
            "diffusion" => Ok(SpectralKernel::Diffusion { t: time(arg)? }),
            "highpass" => Ok(SpectralKernel::HighPass { t: time(arg)? }),
            "custom" => {
                let coeffs = arg
                    .ok_or_else(|| bad("missing coefficients"))?
                    .split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|_| bad("bad coefficient")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SpectralKernel::Custom { series: ChebyshevSeries::new(coeffs)? })
            }
            _ => Err(bad("unknown kernel")),
        }
    }
}

impl TryFrom<String> for SpectralKernel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpectralKernel> for String {
    fn from(k: SpectralKernel) -> String {
        k.to_string()
    }
}

/// Pairwise `f_r` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub kernel: SpectralKernel,
    /// Set when computed from an extremal spectrum.
    pub approximate: bool,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

const DIRECT_SUM_MAX_N: usize = 512;

/// `f_r` for every pair of nodes.
pub fn spectral_distance_matrix(spectrum: &SpectralDecomposition, kernel: &SpectralKernel) -> Result<DistanceMatrix> {
    let approximate = !spectrum.is_full();
    if approximate {
        log::warn!("distances from a partial spectrum are approximate");
    }
    let weights = kernel.weights(spectrum)?;
    let n = spectrum.n();
    let mut y = spectrum.eigenvectors.clone();
    for (mut col, &w) in y.columns_mut().into_iter().zip(&weights) {
        col *= w.sqrt();
    }
    let mut values = Array2::zeros((n, n));
    if n <= DIRECT_SUM_MAX_N {
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                values[[i, j]] = d2.sqrt();
                values[[j, i]] = d2.sqrt();
            }
        }
    } else {
        let gram = y.dot(&y.t());
        for i in 0..n {
            for j in i + 1..n {
                let d2 = (gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]]).max(0.0);
                values[[i, j]] = d2.sqrt();
                values[[j, i]] = d2.sqrt();
            }
        }
    }
    Ok(DistanceMatrix { values, kernel: kernel.clone(), approximate })
}

/// Chebyshev coefficients of one bump filter per eigenvalue: column `j` fits
/// `λ̃ ↦ √r(λ_j)·exp(−(λ̃ − λ̃_j)²·c_max)` at order `order`. The encoding
/// `P = U·B·Θ` then has squared row distances close to `f_r²`.
pub fn bump_llpe_construct(
    spectrum: &SpectralDecomposition,
    kernel: &SpectralKernel,
    c_max: f64,
    order: usize,
) -> Result<LlpeParams> {
    if !spectrum.is_full() {
        return Err(Error::Config("bump construction needs the full spectrum".into()));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::Parameter(format!("c_max must be positive, got {c_max}")));
    }
    let n = spectrum.len();
    if n > 50 {
        log::warn!("bump construction on {n} eigenvalues; intended for small graphs");
    }
    let lt = normalize_eigenvalues(spectrum.eigenvalues.as_slice().expect("contiguous"));
    let min_gap = 3.0 / c_max.sqrt();
    if let Some(w) = lt.windows(2).find(|w| w[1] - w[0] > 0.0 && w[1] - w[0] < min_gap) {
        log::warn!(
            "eigenvalues {:.4} and {:.4} are closer than {min_gap:.4}; bumps overlap",
            w[0] + 1.0,
            w[1] + 1.0
        );
    }
    let weights = kernel.weights(spectrum)?;
    let mut theta = Array2::zeros((order + 1, n));
    for (j, (&center, &r)) in lt.iter().zip(&weights).enumerate() {
        if r == 0.0 {
            continue;
        }
        let amp = r.sqrt();
        let series = cheb_fit(
            |x| amp * (-(x - center).powi(2) * c_max).exp(),
            order,
            &FitMethod::Quadrature,
        )?;
        for (m, &c) in series.coeffs().iter().enumerate() {
            theta[[m, j]] = c;
        }
    }
    Ok(LlpeParams { theta })
}

/// Largest `|‖P_i − P_j‖² − f(i,j)²|` over pairs, absolute and divided by the
/// largest `f(i,j)²`.
pub fn encoding_distance_error(encoding: &Array2<f64>, target: &DistanceMatrix) -> (f64, f64) {
    let n = encoding.nrows();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p2: f64 = encoding
                .row(i)
                .iter()
                .zip(encoding.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let f2 = target.get(i, j).powi(2);
            worst = worst.max((p2 - f2).abs());
            scale = scale.max(f2);
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { worst };
    (worst, rel)
}

/// Monte-Carlo estimate of the expected round-trip time `i → j → i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommuteEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Completed trials.
    pub trials: usize,
    /// Trials abandoned at `max_steps`.
    pub truncated: usize,
}

/// Average of independent simple random-walk round trips between `i` and `j`.
/// Trials longer than `max_steps` are dropped from the mean and counted.
pub fn commute_mc_oracle(
    graph: &Graph,
    i: usize,
    j: usize,
    trials: usize,
    max_steps: usize,
    seed: u64,
) -> Result<CommuteEstimate> {
    let n = graph.n();
    if i >= n || j >= n || i == j {
        return Err(Error::Parameter(format!("need two distinct nodes below {n}, got {i} and {j}")));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let comp = graph.components();
    if comp[i] != comp[j] {
        return Err(Error::Reachability { from: i, to: j });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = |rng: &mut ChaCha8Rng, from: usize, to: usize, budget: usize| -> Option<usize> {
        let mut at = from;
        for step in 1..=budget {
            let nb = graph.neighbors(at);
            at = nb[rng.random_range(0..nb.len())];
            if at == to {
                return Some(step);
            }
        }
        None
    };
    let mut samples = Vec::with_capacity(trials);
    let mut truncated = 0;
    for _ in 0..trials {
        let there = walk(&mut rng, i, j, max_steps);
        let round = there.and_then(|a| walk(&mut rng, j, i, max_steps - a).map(|b| a + b));
        match round {
            Some(steps) => samples.push(steps as f64),
            None => truncated += 1,
        }
    }
    if truncated > 0 {
        log::warn!("{truncated} of {trials} walks hit the {max_steps}-step limit");
    }
    if samples.is_empty() {
        return Err(Error::Convergence { iterations: max_steps, residuals: vec![] });
    }
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(CommuteEstimate { mean, std_err: (var / k).sqrt(), trials: samples.len(), truncated })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &idx[start..end] {
            r[i] = avg;
        }
        start = end;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Parameter("spearman needs two equal-length samples of size ≥ 2".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedMeasure("spearman of a constant sample".into()));
    }
    Ok(cov / (va * vb).sqrt())
}
