//! Eigendecompositions of the normalized Laplacian.

mod dense;
mod lanczos;

pub use dense::{full_eigh, full_eigh_with_cap, principal_angles, DENSE_CAP};
pub use lanczos::{extremal_eigs, extremal_eigs_with_stats, LanczosOptions, SolverStats};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, CsrMatrix, Graph};

/// Eigenvalues below this are treated as exact zeros.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

/// Symmetric linear map `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut a = Array2::zeros((n, n));
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                a[[i, j]] = col[i];
            }
        }
        a
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }

    fn to_dense(&self) -> Array2<f64> {
        CsrMatrix::to_dense(self)
    }
}

impl LinearOperator for Array2<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(self.rows()) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn to_dense(&self) -> Array2<f64> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Full,
    Extremal { first_k: usize, last_k: usize },
}

/// Ascending eigenvalues with eigenvectors stored as the columns of an
/// `n × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
    pub kind: SpectrumKind,
}

impl SpectralDecomposition {
    pub fn new(eigenvalues: Array1<f64>, eigenvectors: Array2<f64>, kind: SpectrumKind) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::Parameter(format!(
                "{} eigenvalues for {} eigenvectors",
                eigenvalues.len(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().zip(eigenvalues.iter().skip(1)).any(|(a, b)| a > b) {
            return Err(Error::Parameter("eigenvalues must be non-decreasing".into()));
        }
        let mut d = SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            kind,
        };
        d.normalize_signs();
        Ok(d)
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of stored eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.kind == SpectrumKind::Full
    }

    /// Flips each eigenvector so that its first entry with magnitude above
    /// 1e-12 is positive.
    pub fn normalize_signs(&mut self) {
        for mut col in self.eigenvectors.columns_mut() {
            if let Some(&first) = col.iter().find(|v| v.abs() > 1e-12) {
                if first < 0.0 {
                    col.mapv_inplace(|v| -v);
                }
            }
        }
    }

    /// Rotates the eigenspace of λ ≈ 0 so that its first vector is the
    /// normalized `√degree` vector. When the graph is disconnected the null
    /// space is degenerate and solvers return an arbitrary basis for it; this
    /// pins the trivial direction so the remaining null vectors carry the
    /// component structure.
    pub fn align_trivial(&mut self, degrees: &[usize]) {
        let zeros = self.eigenvalues.iter().take_while(|&&l| l.abs() < ZERO_EIGENVALUE).count();
        if zeros < 2 || degrees.len() != self.n() {
            return;
        }
        let mut v: Array1<f64> = degrees.iter().map(|&d| (d as f64).sqrt()).collect();
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            return;
        }
        v /= norm;
        let z = self.eigenvectors.slice(s![.., ..zeros]).to_owned();
        let mut c = z.t().dot(&v);
        let cn = c.dot(&c).sqrt();
        if cn < 1e-8 {
            return;
        }
        c /= cn;
        let q = complete_basis(&c);
        self.eigenvectors.slice_mut(s![.., ..zeros]).assign(&z.dot(&q));
        self.normalize_signs();
    }

    /// Keeps the first `first_k` and last `last_k` eigenpairs.
    pub fn restrict(&self, first_k: usize, last_k: usize) -> Result<Self> {
        let m = self.len();
        if first_k + last_k > m || first_k > self.low_count() || last_k > self.high_count() {
            return Err(Error::Config(format!(
                "cannot keep {first_k} + {last_k} of {m} eigenpairs"
            )));
        }
        let idx: Vec<usize> = (0..first_k).chain(m - last_k..m).collect();
        Ok(SpectralDecomposition {
            eigenvalues: idx.iter().map(|&i| self.eigenvalues[i]).collect(),
            eigenvectors: self.eigenvectors.select(Axis(1), &idx),
            kind: SpectrumKind::Extremal { first_k, last_k },
        })
    }

    /// How many eigenpairs at the low end of the spectrum are stored.
    pub fn low_count(&self) -> usize {
        match self.kind {
            SpectrumKind::Full => self.len(),
            SpectrumKind::Extremal { first_k, .. } => first_k,
        }
    }

    /// How many eigenpairs at the high end of the spectrum are stored.
    pub fn high_count(&self) -> usize {
        match self.kind {
            SpectrumKind::Full => self.len(),
            SpectrumKind::Extremal { last_k, .. } => last_k,
        }
    }

    /// Columns `1..=k`: the first `k` eigenvectors after the trivial one.
    pub fn first_nontrivial(&self, k: usize) -> Result<ArrayView2<'_, f64>> {
        if k + 1 > self.low_count() {
            return Err(Error::Config(format!(
                "{k} nontrivial eigenvectors requested, {} low-end pairs stored",
                self.low_count()
            )));
        }
        Ok(self.eigenvectors.slice(s![.., 1..=k]))
    }

    /// The last `k` eigenvectors (largest eigenvalues), ascending.
    pub fn last(&self, k: usize) -> Result<ArrayView2<'_, f64>> {
        if k > self.high_count() {
            return Err(Error::Config(format!(
                "{k} top eigenvectors requested, {} high-end pairs stored",
                self.high_count()
            )));
        }
        let m = self.len();
        Ok(self.eigenvectors.slice(s![.., m - k..]))
    }

    /// Largest `‖A u_i − λ_i u_i‖₂ / (1 + |λ_i|)` over the stored pairs.
    pub fn max_residual(&self, op: &dyn LinearOperator) -> f64 {
        let n = self.n();
        let mut y = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let u = self.eigenvectors.column(j).to_vec();
            op.apply(&u, &mut y);
            let r = y.iter().zip(&u).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(r / (1.0 + lam.abs()));
        }
        worst
    }

    /// `‖UᵀU − I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.t().dot(&self.eigenvectors);
        g.indexed_iter()
            .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues on the first line, then one line per node holding the
    /// entries of every eigenvector.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let line = |vals: &mut dyn Iterator<Item = f64>| {
            vals.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        writeln!(w, "{}", line(&mut self.eigenvalues.iter().copied()))?;
        for row in self.eigenvectors.rows() {
            writeln!(w, "{}", line(&mut row.iter().copied()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Orthonormal `r × r` matrix whose first column is the unit vector `c`.
fn complete_basis(c: &Array1<f64>) -> Array2<f64> {
    let r = c.len();
    let mut cols: Vec<Array1<f64>> = vec![c.clone()];
    // candidates e_i in order of smallest overlap with c
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()));
    for &i in &order {
        if cols.len() == r {
            break;
        }
        let mut e = Array1::zeros(r);
        e[i] = 1.0;
        for _ in 0..2 {
            for q in &cols {
                let d = q.dot(&e);
                e.scaled_add(-d, q);
            }
        }
        let norm = e.dot(&e).sqrt();
        if norm > 1e-8 {
            cols.push(e / norm);
        }
    }
    let mut q = Array2::zeros((r, r));
    for (j, col) in cols.iter().enumerate() {
        q.column_mut(j).assign(col);
    }
    q
}

/// λ̃ = λ − 1 clamped to [-1, 1].
pub fn normalize_eigenvalues(eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues.iter().map(|&l| (l - 1.0).clamp(-1.0, 1.0)).collect()
}

/// Largest absolute eigenvalue of a symmetric operator by power iteration
/// on `A²`, started from a random vector. Iteration stops once the relative
/// residual of the Rayleigh quotient drops below `tol`.
pub fn operator_norm(op: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut ax = vec![0.0; n];
    let mut a2x = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= norm);
        op.apply(&x, &mut ax);
        op.apply(&ax, &mut a2x);
        let rho: f64 = ax.iter().map(|v| v * v).sum();
        if rho == 0.0 {
            return Ok(0.0);
        }
        residual = x
            .iter()
            .zip(&a2x)
            .map(|(xi, yi)| (yi - rho * xi).powi(2))
            .sum::<f64>()
            .sqrt()
            / rho;
        if residual <= tol {
            return Ok(rho.sqrt());
        }
        std::mem::swap(&mut x, &mut a2x);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residuals: vec![residual],
    })
}

/// Full spectrum of the graph's normalized Laplacian, null space aligned.
pub fn laplacian_spectrum(graph: &Graph) -> Result<SpectralDecomposition> {
    let l = normalized_laplacian(graph);
    let mut d = full_eigh(&l)?;
    d.align_trivial(&graph.degrees());
    Ok(d)
}

/// Extremal eigenpairs of the graph's normalized Laplacian, null space aligned.
pub fn laplacian_extremal(
    graph: &Graph,
    k_small: usize,
    k_large: usize,
    opts: &LanczosOptions,
) -> Result<SpectralDecomposition> {
    let l = normalized_laplacian(graph);
    let mut d = extremal_eigs(&l, k_small, k_large, opts)?;
    d.align_trivial(&graph.degrees());
    Ok(d)
}
