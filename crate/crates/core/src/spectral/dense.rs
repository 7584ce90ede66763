use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};

use super::{LinearOperator, SpectralDecomposition, SpectrumKind};
use crate::error::{Error, Result};

/// Default size limit for dense eigendecomposition.
pub const DENSE_CAP: usize = 8192;

/// All eigenpairs of a symmetric operator.
pub fn full_eigh(op: &dyn LinearOperator) -> Result<SpectralDecomposition> {
    full_eigh_with_cap(op, DENSE_CAP)
}

pub fn full_eigh_with_cap(op: &dyn LinearOperator, cap: usize) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if n > cap {
        return Err(Error::Capacity { n, cap });
    }
    if n == 0 {
        return SpectralDecomposition::new(Array1::zeros(0), Array2::zeros((0, 0)), SpectrumKind::Full);
    }
    let a = op.to_dense();
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| {
        log::error!("dense eigensolver failed: {e:?}");
        Error::Convergence { iterations: 0, residuals: vec![] }
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Array1<f64> = (0..n).map(|i| s[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)]);
    SpectralDecomposition::new(values, vectors, SpectrumKind::Full)
}

/// Principal angles (radians, ascending) between the column spans of two
/// matrices with orthonormal columns, from the singular values of `AᵀB`.
pub fn principal_angles(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Parameter("subspaces live in different dimensions".into()));
    }
    let c = a.t().dot(&b);
    let (p, q) = c.dim();
    if p == 0 || q == 0 {
        return Ok(vec![]);
    }
    let m = Mat::<f64>::from_fn(p, q, |i, j| c[[i, j]]);
    let sv = m
        .singular_values()
        .map_err(|_| Error::Convergence { iterations: 0, residuals: vec![] })?;
    Ok(sv.iter().map(|&s| s.clamp(-1.0, 1.0).acos()).collect())
}
