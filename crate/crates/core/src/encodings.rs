//! Positional encodings: Laplacian eigenvector baselines, random-walk
//! structural encodings and the learnable Chebyshev-filtered encoding.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chebyshev::basis_into;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{normalize_eigenvalues, SpectralDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EncodingSpec {
    NoPe,
    /// First `k` nontrivial eigenvectors.
    LpeFk { k: usize },
    /// First `k` nontrivial and last `k` eigenvectors.
    LpeFlk { k: usize },
    LpeFull,
    Rwse { m: usize },
    /// Learnable encoding over the full spectrum, polynomial order `order`,
    /// `dim` output columns.
    Llpe { order: usize, dim: usize, l1: f64, l2: f64 },
    /// Learnable encoding over the first and last `k` eigenpairs only.
    LlpeLarge { k: usize, order: usize, dim: usize, l1: f64, l2: f64 },
}

/// Which part of the spectrum an encoding needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumNeed {
    None,
    Full,
    Extremal { first_k: usize, last_k: usize },
}

impl EncodingSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EncodingSpec::NoPe | EncodingSpec::LpeFull => true,
            EncodingSpec::LpeFk { k } | EncodingSpec::LpeFlk { k } => k >= 1,
            EncodingSpec::Rwse { m } => m >= 1,
            EncodingSpec::Llpe { dim, l1, l2, .. } => dim >= 1 && l1 >= 0.0 && l2 >= 0.0,
            EncodingSpec::LlpeLarge { k, dim, l1, l2, .. } => k >= 1 && dim >= 1 && l1 >= 0.0 && l2 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid encoding {self}")))
        }
    }

    pub fn need(&self) -> SpectrumNeed {
        match *self {
            EncodingSpec::NoPe | EncodingSpec::Rwse { .. } => SpectrumNeed::None,
            EncodingSpec::LpeFull | EncodingSpec::Llpe { .. } => SpectrumNeed::Full,
            EncodingSpec::LpeFk { k } => SpectrumNeed::Extremal { first_k: k + 1, last_k: 0 },
            EncodingSpec::LpeFlk { k } => SpectrumNeed::Extremal { first_k: k + 1, last_k: k },
            EncodingSpec::LlpeLarge { k, .. } => SpectrumNeed::Extremal { first_k: k, last_k: k },
        }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, EncodingSpec::Llpe { .. } | EncodingSpec::LlpeLarge { .. })
    }

    /// `(order, dim, l1, l2)` for the learnable variants.
    pub fn llpe_shape(&self) -> Option<(usize, usize, f64, f64)> {
        match *self {
            EncodingSpec::Llpe { order, dim, l1, l2 } | EncodingSpec::LlpeLarge { order, dim, l1, l2, .. } => {
                Some((order, dim, l1, l2))
            }
            _ => None,
        }
    }

    /// Short name without parameters, used to group results.
    pub fn family(&self) -> &'static str {
        match self {
            EncodingSpec::NoPe => "nope",
            EncodingSpec::LpeFk { .. } => "lpe-fk",
            EncodingSpec::LpeFlk { .. } => "lpe-flk",
            EncodingSpec::LpeFull => "lpe-full",
            EncodingSpec::Rwse { .. } => "rwse",
            EncodingSpec::Llpe { .. } => "llpe",
            EncodingSpec::LlpeLarge { .. } => "llpe-large",
        }
    }
}

impl fmt::Display for EncodingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EncodingSpec::NoPe => write!(f, "nope"),
            EncodingSpec::LpeFk { k } => write!(f, "lpe-fk:{k}"),
            EncodingSpec::LpeFlk { k } => write!(f, "lpe-flk:{k}"),
            EncodingSpec::LpeFull => write!(f, "lpe-full"),
            EncodingSpec::Rwse { m } => write!(f, "rwse:{m}"),
            EncodingSpec::Llpe { order, dim, l1, l2 } => write!(f, "llpe:M={order},d={dim},l1={l1},l2={l2}"),
            EncodingSpec::LlpeLarge { k, order, dim, l1, l2 } => {
                write!(f, "llpe-large:k={k},M={order},d={dim},l1={l1},l2={l2}")
            }
        }
    }
}

const DEFAULT_ORDER: usize = 64;
const DEFAULT_DIM: usize = 32;
const DEFAULT_L1: f64 = 0.001;

impl FromStr for EncodingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s, None),
        };
        let bad = |msg: &str| Error::Config(format!("encoding {s:?}: {msg}"));
        let single = |args: Option<&str>| -> Result<usize> {
            args.ok_or_else(|| bad("missing size"))?
                .parse()
                .map_err(|_| bad("size is not an integer"))
        };
        let spec = match head {
            "nope" if args.is_none() => EncodingSpec::NoPe,
            "lpe-full" if args.is_none() => EncodingSpec::LpeFull,
            "lpe-fk" => EncodingSpec::LpeFk { k: single(args)? },
            "lpe-flk" => EncodingSpec::LpeFlk { k: single(args)? },
            "rwse" => EncodingSpec::Rwse { m: single(args)? },
            "llpe" | "llpe-large" => {
                let mut k = None;
                let mut order = DEFAULT_ORDER;
                let mut dim = DEFAULT_DIM;
                let mut l1 = DEFAULT_L1;
                let mut l2 = 0.0;
                for kv in args.unwrap_or("").split(',').filter(|t| !t.trim().is_empty()) {
                    let (key, val) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    let val = val.trim();
                    let int = || val.parse::<usize>().map_err(|_| bad("expected an integer"));
                    let real = || val.parse::<f64>().map_err(|_| bad("expected a number"));
                    match key.trim() {
                        "k" if head == "llpe-large" => k = Some(int()?),
                        "M" => order = int()?,
                        "d" => dim = int()?,
                        "l1" => l1 = real()?,
                        "l2" => l2 = real()?,
                        other => return Err(bad(&format!("unknown key {other:?}"))),
                    }
                }
                if head == "llpe" {
                    EncodingSpec::Llpe { order, dim, l1, l2 }
                } else {
                    let k = k.ok_or_else(|| bad("llpe-large needs k"))?;
                    EncodingSpec::LlpeLarge { k, order, dim, l1, l2 }
                }
            }
            _ => return Err(bad("unknown encoding")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for EncodingSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EncodingSpec> for String {
    fn from(spec: EncodingSpec) -> String {
        spec.to_string()
    }
}

/// Trainable coefficient matrix Θ of shape `(M+1) × d`; column `j` holds the
/// Chebyshev coefficients of the `j`-th spectral filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LlpeParams {
    pub theta: Array2<f64>,
}

impl LlpeParams {
    pub fn zeros(order: usize, dim: usize) -> Self {
        LlpeParams { theta: Array2::zeros((order + 1, dim)) }
    }

    /// iid Gaussian entries with standard deviation `0.1/√(M+1)`.
    pub fn init(order: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1 / ((order + 1) as f64).sqrt()).expect("positive std");
        LlpeParams {
            theta: Array2::from_shape_fn((order + 1, dim), |_| normal.sample(&mut rng)),
        }
    }

    pub fn order(&self) -> usize {
        self.theta.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.theta.ncols()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.theta.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("{f:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if rows.first().is_some_and(|r| r.len() != row.len()) {
                return Err(Error::Parse { line: i + 1, msg: "ragged row".into() });
            }
            rows.push(row);
        }
        let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
        if r == 0 || c == 0 {
            return Err(Error::Parse { line: 1, msg: "empty coefficient file".into() });
        }
        Ok(LlpeParams {
            theta: Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]),
        })
    }
}

/// Encoding matrix with the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalEncoding {
    pub matrix: Array2<f64>,
    pub spec: EncodingSpec,
}

/// `B[i, m] = T_m(λ̃_i)` for the stored eigenvalues.
pub fn chebyshev_basis_matrix(spectrum: &SpectralDecomposition, order: usize) -> Array2<f64> {
    let lt = normalize_eigenvalues(spectrum.eigenvalues.as_slice().expect("contiguous"));
    let mut b = Array2::zeros((lt.len(), order + 1));
    for (i, &x) in lt.iter().enumerate() {
        basis_into(x, b.row_mut(i).as_slice_mut().expect("contiguous rows"));
    }
    b
}

fn check_theta(theta: &LlpeParams, order: usize) -> Result<()> {
    if theta.order() != order {
        return Err(Error::Config(format!(
            "coefficients have order {}, basis has order {order}",
            theta.order()
        )));
    }
    Ok(())
}

/// `P = U·B·Θ`.
pub fn llpe_forward(spectrum: &SpectralDecomposition, theta: &LlpeParams) -> Array2<f64> {
    let b = chebyshev_basis_matrix(spectrum, theta.order());
    spectrum.eigenvectors.dot(&b.dot(&theta.theta))
}

/// `∂loss/∂Θ = Bᵀ (Uᵀ · upstream)` for `upstream = ∂loss/∂P`.
pub fn llpe_grad(spectrum: &SpectralDecomposition, theta: &LlpeParams, upstream: &Array2<f64>) -> Result<Array2<f64>> {
    if upstream.dim() != (spectrum.n(), theta.dim()) {
        return Err(Error::Config(format!(
            "upstream gradient has shape {:?}, expected ({}, {})",
            upstream.dim(),
            spectrum.n(),
            theta.dim()
        )));
    }
    let b = chebyshev_basis_matrix(spectrum, theta.order());
    Ok(b.t().dot(&spectrum.eigenvectors.t().dot(upstream)))
}

/// `Σ_j l1·‖W[:,j]‖₁ + l2·‖W[:,j]‖₂²` with `W = B·Θ`, and its gradient in Θ.
/// The l1 subgradient is taken as 0 at exact zeros.
pub fn reg_penalty(theta: &LlpeParams, spectrum: &SpectralDecomposition, l1: f64, l2: f64) -> (f64, Array2<f64>) {
    let b = chebyshev_basis_matrix(spectrum, theta.order());
    penalty_with_basis(&b, &theta.theta, l1, l2)
}

fn penalty_with_basis(b: &Array2<f64>, theta: &Array2<f64>, l1: f64, l2: f64) -> (f64, Array2<f64>) {
    let w = b.dot(theta);
    let value = w.iter().map(|&x| l1 * x.abs() + l2 * x * x).sum();
    let dw = w.mapv(|x| {
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        l1 * sign + 2.0 * l2 * x
    });
    (value, b.t().dot(&dw))
}

/// Precomputed `U·B` so that training steps cost `O(n·(M+1)·d)`.
#[derive(Debug, Clone)]
pub struct LlpeBasis {
    /// `B`, eigenvalues × (M+1).
    pub cheb: Array2<f64>,
    /// `U·B`, nodes × (M+1).
    pub ub: Array2<f64>,
}

impl LlpeBasis {
    pub fn new(spectrum: &SpectralDecomposition, order: usize) -> Self {
        let cheb = chebyshev_basis_matrix(spectrum, order);
        let ub = spectrum.eigenvectors.dot(&cheb);
        LlpeBasis { cheb, ub }
    }

    pub fn order(&self) -> usize {
        self.cheb.ncols() - 1
    }

    pub fn forward(&self, theta: &LlpeParams) -> Result<Array2<f64>> {
        check_theta(theta, self.order())?;
        Ok(self.ub.dot(&theta.theta))
    }

    pub fn grad(&self, upstream: &Array2<f64>) -> Array2<f64> {
        self.ub.t().dot(upstream)
    }

    pub fn penalty(&self, theta: &LlpeParams, l1: f64, l2: f64) -> (f64, Array2<f64>) {
        penalty_with_basis(&self.cheb, &theta.theta, l1, l2)
    }
}

/// Spectrum an encoding is evaluated on: the input itself, or the first and
/// last `k` pairs of it for the large-graph variant.
pub fn encoding_spectrum(spec: &EncodingSpec, spectrum: &SpectralDecomposition) -> Result<SpectralDecomposition> {
    match *spec {
        EncodingSpec::LlpeLarge { k, .. } => spectrum.restrict(k, k),
        EncodingSpec::Llpe { .. } if !spectrum.is_full() => {
            Err(Error::Config("llpe needs the full spectrum; use llpe-large with an extremal one".into()))
        }
        _ => Ok(spectrum.clone()),
    }
}

/// Builds the encoding matrix for `spec`.
pub fn build_encoding(
    spec: &EncodingSpec,
    graph: &Graph,
    spectrum: Option<&SpectralDecomposition>,
    params: Option<&LlpeParams>,
) -> Result<PositionalEncoding> {
    spec.validate()?;
    let need_spectrum = || spectrum.ok_or_else(|| Error::Config(format!("{spec} needs a spectrum")));
    let matrix = match *spec {
        EncodingSpec::NoPe => Array2::zeros((graph.n(), 0)),
        EncodingSpec::Rwse { m } => rwse(graph, m),
        EncodingSpec::LpeFk { k } => need_spectrum()?.first_nontrivial(k)?.to_owned(),
        EncodingSpec::LpeFlk { k } => {
            let s = need_spectrum()?;
            concatenate(Axis(1), &[s.first_nontrivial(k)?, s.last(k)?]).expect("same row count")
        }
        EncodingSpec::LpeFull => {
            let s = need_spectrum()?;
            if !s.is_full() {
                return Err(Error::Config("lpe-full needs the full spectrum".into()));
            }
            s.eigenvectors.clone()
        }
        EncodingSpec::Llpe { order, dim, .. } | EncodingSpec::LlpeLarge { order, dim, .. } => {
            let theta = params.ok_or_else(|| Error::Config(format!("{spec} needs coefficients")))?;
            check_theta(theta, order)?;
            if theta.dim() != dim {
                return Err(Error::Config(format!("coefficients have {} columns, spec says {dim}", theta.dim())));
            }
            llpe_forward(&encoding_spectrum(spec, need_spectrum()?)?, theta)
        }
    };
    if matrix.nrows() != graph.n() {
        return Err(Error::Config(format!(
            "spectrum has dimension {}, graph has {} nodes",
            matrix.nrows(),
            graph.n()
        )));
    }
    Ok(PositionalEncoding { matrix, spec: *spec })
}

const RWSE_BLOCK: usize = 64;

/// Return probabilities of the random walk: column `s-1` holds the diagonal
/// of `(D⁻¹A)^s`. Isolated nodes get zero rows.
///
/// Uses `diag((D⁻¹A)^s) = diag(S^s)` with `S = D^{-1/2} A D^{-1/2}` and
/// propagates blocks of unit vectors through `S`.
pub fn rwse(graph: &Graph, m: usize) -> Array2<f64> {
    let n = graph.n();
    let isolated = graph.isolated_nodes();
    if !isolated.is_empty() {
        log::warn!("rwse: {} isolated node(s) get zero rows", isolated.len());
    }
    let inv_sqrt: Array1<f64> = (0..n)
        .map(|i| match graph.degree(i) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut out = Array2::zeros((n, m));
    let mut x = Array2::<f64>::zeros((n, RWSE_BLOCK));
    let mut y = Array2::<f64>::zeros((n, RWSE_BLOCK));
    for start in (0..n).step_by(RWSE_BLOCK) {
        let width = RWSE_BLOCK.min(n - start);
        x.fill(0.0);
        for c in 0..width {
            x[[start + c, c]] = 1.0;
        }
        for step in 0..m {
            for i in 0..n {
                let mut row = y.row_mut(i);
                row.fill(0.0);
                for &j in graph.neighbors(i) {
                    let w = inv_sqrt[i] * inv_sqrt[j];
                    row.scaled_add(w, &x.row(j));
                }
            }
            std::mem::swap(&mut x, &mut y);
            for c in 0..width {
                out[[start + c, step]] = x[[start + c, c]];
            }
        }
    }
    out
}
