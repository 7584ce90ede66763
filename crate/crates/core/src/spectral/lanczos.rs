//! Thick-restart Lanczos with full reorthogonalization.
//!
//! The projected matrix is assembled from the classical Gram–Schmidt
//! coefficients (two passes per step), so it is the Arnoldi Hessenberg
//! matrix of a symmetric operator and stays valid across thick restarts.

use faer::{Mat, Side};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SpectralDecomposition, SpectrumKind};
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Residual bound `‖A x − θ x‖₂` for every returned pair.
    pub tol: f64,
    /// Restart cycles allowed per Krylov run.
    pub max_restarts: usize,
    /// Krylov subspace size; defaults to `max(2·nev + 16, 40)`.
    pub ncv: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-6,
            max_restarts: 2000,
            ncv: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub matvecs: usize,
    pub restarts: usize,
    /// Largest Krylov workspace held at once.
    pub workspace_bytes: usize,
}

/// The `k_small` smallest and `k_large` largest eigenpairs of a normalized
/// Laplacian. The top end is computed as the bottom end of `2I − L`.
pub fn extremal_eigs(
    l: &CsrMatrix,
    k_small: usize,
    k_large: usize,
    opts: &LanczosOptions,
) -> Result<SpectralDecomposition> {
    extremal_eigs_with_stats(l, k_small, k_large, opts).map(|(d, _)| d)
}

pub fn extremal_eigs_with_stats(
    l: &CsrMatrix,
    k_small: usize,
    k_large: usize,
    opts: &LanczosOptions,
) -> Result<(SpectralDecomposition, SolverStats)> {
    let n = l.n();
    if k_small + k_large >= n {
        return Err(Error::Parameter(format!(
            "k_small + k_large = {} must be below n = {n}",
            k_small + k_large
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stats = SolverStats::default();

    // zero rows are exact λ = 0 pairs on coordinate vectors
    let zero_rows = l.zero_rows();
    let mut support = vec![true; n];
    for &i in &zero_rows {
        support[i] = false;
    }
    let active = n - zero_rows.len();
    let (null_vecs, top_vecs) = component_pairs(l, &support);

    let mut values: Vec<f64> = Vec::with_capacity(k_small + k_large);
    let mut vectors: Vec<Array1<f64>> = Vec::with_capacity(k_small + k_large);
    for &i in zero_rows.iter().take(k_small) {
        let mut e = Array1::zeros(n);
        e[i] = 1.0;
        values.push(0.0);
        vectors.push(e);
    }
    for v in null_vecs.rows().into_iter().take(k_small - vectors.len()) {
        values.push(0.0);
        vectors.push(v.to_owned());
    }

    let low = k_small - vectors.len();
    let mut low_vecs = Array2::zeros((0, n));
    let mut low_top = f64::NEG_INFINITY;
    if low > 0 {
        let apply = |x: &[f64], y: &mut [f64]| l.matvec(x, y);
        let problem = Problem { apply: &apply, n, support: &support, dim: active };
        let (vals, vecs) = lowest_verified(&problem, low, null_vecs.view(), opts, &mut rng, &mut stats)?;
        low_top = vals.last().copied().unwrap_or(low_top);
        values.extend(&vals);
        vectors.extend(vecs.rows().into_iter().map(|r| r.to_owned()));
        low_vecs = vecs;
    }

    let mut high_values = Vec::new();
    let mut high_vectors = Vec::new();
    for v in top_vecs.rows().into_iter().take(k_large) {
        high_values.push(2.0);
        high_vectors.push(v.to_owned());
    }
    let high = k_large - high_vectors.len();
    if high > 0 {
        if high + top_vecs.nrows() + low_vecs.nrows() + null_vecs.nrows() > active {
            return Err(Error::Parameter(format!(
                "only {active} non-isolated coordinates for {k_large} top eigenpairs"
            )));
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            l.matvec(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = 2.0 * xi - *yi;
            }
        };
        let problem = Problem { apply: &apply, n, support: &support, dim: active };
        let mut locked = ndarray::concatenate(Axis(0), &[top_vecs.view(), null_vecs.view()])
            .expect("matching widths");
        let (mut vals, mut vecs) = lowest_verified(&problem, high, locked.view(), opts, &mut rng, &mut stats)?;
        // the two ends only need explicit decoupling when their spectra meet
        if 2.0 - vals[high - 1] <= low_top + 1e-3 {
            locked = ndarray::concatenate(Axis(0), &[locked.view(), low_vecs.view()]).expect("matching widths");
            (vals, vecs) = lowest_verified(&problem, high, locked.view(), opts, &mut rng, &mut stats)?;
        }
        for (mu, row) in vals.iter().zip(vecs.rows()) {
            high_values.push(2.0 - mu);
            high_vectors.push(row.to_owned());
        }
    }
    values.extend(high_values);
    vectors.extend(high_vectors);

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues: Array1<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = Array2::zeros((n, order.len()));
    for (j, &i) in order.iter().enumerate() {
        eigenvectors.column_mut(j).assign(&vectors[i]);
    }
    let decomposition = SpectralDecomposition::new(
        eigenvalues,
        eigenvectors,
        SpectrumKind::Extremal { first_k: k_small, last_k: k_large },
    )?;

    let mut y = vec![0.0; n];
    let mut residuals = Vec::new();
    for (j, &lam) in decomposition.eigenvalues.iter().enumerate() {
        let u = decomposition.eigenvectors.column(j).to_vec();
        l.matvec(&u, &mut y);
        let r = y.iter().zip(&u).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
        residuals.push(r);
    }
    let bad = decomposition
        .eigenvalues
        .iter()
        .zip(&residuals)
        .any(|(lam, r)| *r > opts.tol * (1.0 + lam.abs()));
    if bad {
        return Err(Error::Convergence { iterations: stats.restarts, residuals });
    }
    Ok((decomposition, stats))
}

/// Exact λ = 0 vectors (`√degree` on each connected component) and λ = 2
/// vectors (`±√degree` on each bipartite component), read off the sparsity
/// pattern. Each candidate is checked against the operator; if any check
/// fails the matrix is not a normalized Laplacian and nothing is returned.
fn component_pairs(l: &CsrMatrix, support: &[bool]) -> (Array2<f64>, Array2<f64>) {
    let n = l.n();
    let empty = || (Array2::zeros((0, n)), Array2::zeros((0, n)));
    let mut comp = vec![usize::MAX; n];
    let mut side = vec![0i8; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut bipartite: Vec<bool> = Vec::new();
    let mut stack = Vec::new();
    for s0 in 0..n {
        if !support[s0] || comp[s0] != usize::MAX {
            continue;
        }
        let c = members.len();
        members.push(vec![s0]);
        bipartite.push(true);
        comp[s0] = c;
        side[s0] = 1;
        stack.push(s0);
        while let Some(u) = stack.pop() {
            for (v, _) in l.row(u).filter(|&(v, x)| v != u && x != 0.0) {
                if comp[v] == usize::MAX {
                    comp[v] = c;
                    side[v] = -side[u];
                    members[c].push(v);
                    stack.push(v);
                } else if side[v] == side[u] {
                    bipartite[c] = false;
                }
            }
        }
    }
    let sqrt_deg: Vec<f64> = (0..n)
        .map(|i| (l.row(i).filter(|&(j, x)| j != i && x != 0.0).count() as f64).sqrt())
        .collect();
    let mut nulls = Array2::zeros((members.len(), n));
    let mut tops = Vec::new();
    for (c, nodes) in members.iter().enumerate() {
        let norm = nodes.iter().map(|&i| sqrt_deg[i].powi(2)).sum::<f64>().sqrt();
        for &i in nodes {
            nulls[[c, i]] = sqrt_deg[i] / norm;
        }
        let v = nulls.row(c);
        // rows outside the component see none of its entries
        let apply_at = |i: usize, x: &dyn Fn(usize) -> f64| l.row(i).map(|(j, a)| a * x(j)).sum::<f64>();
        if norm == 0.0 || nodes.iter().any(|&i| apply_at(i, &|j| v[j]).abs() > 1e-10) {
            return empty();
        }
        if bipartite[c] {
            let u = |j: usize| v[j] * side[j] as f64;
            if nodes.iter().any(|&i| (apply_at(i, &u) - 2.0 * u(i)).abs() > 1e-10) {
                return empty();
            }
            tops.push((c, nodes));
        }
    }
    let mut top_vecs = Array2::zeros((tops.len(), n));
    for (r, &(c, nodes)) in tops.iter().enumerate() {
        for &i in nodes.iter() {
            top_vecs[[r, i]] = nulls[[c, i]] * side[i] as f64;
        }
    }
    (nulls, top_vecs)
}

struct Problem<'a> {
    apply: &'a dyn Fn(&[f64], &mut [f64]),
    n: usize,
    /// Coordinates where vectors may be nonzero.
    support: &'a [bool],
    dim: usize,
}

/// Runs [`lowest`], then keeps searching the orthogonal complement of what
/// was found for eigenvalues below the current largest one. A single Krylov
/// space only sees one direction per distinct eigenvalue, so repeated
/// eigenvalues (e.g. the null space of a disconnected graph) would otherwise
/// be missed.
fn lowest_verified(
    problem: &Problem,
    nev: usize,
    locked: ArrayView2<f64>,
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
    stats: &mut SolverStats,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let (mut vals, mut vecs) = lowest(problem, nev, locked, None, opts, rng, stats)?;
    while vals.len() + locked.nrows() < problem.dim {
        let all = ndarray::concatenate(Axis(0), &[locked, vecs.view()]).expect("matching widths");
        let top = *vals.last().expect("nev > 0");
        let (extra, extra_vec) = lowest(problem, 1, all.view(), Some(top), opts, rng, stats)?;
        if extra.is_empty() || extra[0] >= top - opts.tol {
            break;
        }
        let pos = vals.partition_point(|&v| v <= extra[0]);
        vals.insert(pos, extra[0]);
        vals.pop();
        let mut rows: Vec<Array1<f64>> = vecs.rows().into_iter().map(|r| r.to_owned()).collect();
        rows.insert(pos, extra_vec.row(0).to_owned());
        rows.pop();
        for (i, r) in rows.iter().enumerate() {
            vecs.row_mut(i).assign(r);
        }
    }
    Ok((vals, vecs))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two-pass classical Gram–Schmidt of `w` against the rows of `locked` and
/// `basis`; returns the accumulated coefficients against `basis`.
fn orthogonalize(w: &mut [f64], basis: ArrayView2<f64>, locked: ArrayView2<f64>) -> Vec<f64> {
    let mut h = gs_pass(w, basis, locked);
    for (hi, c) in h.iter_mut().zip(gs_pass(w, basis, locked)) {
        *hi += c;
    }
    h
}

/// One Gram–Schmidt pass, repeated once more if it removed most of `w`.
fn reorthogonalize(w: &mut [f64], basis: ArrayView2<f64>, locked: ArrayView2<f64>) -> Vec<f64> {
    let before = norm(w);
    let mut h = gs_pass(w, basis, locked);
    if norm(w) < std::f64::consts::FRAC_1_SQRT_2 * before {
        for (hi, c) in h.iter_mut().zip(gs_pass(w, basis, locked)) {
            *hi += c;
        }
    }
    h
}

fn gs_pass(w: &mut [f64], basis: ArrayView2<f64>, locked: ArrayView2<f64>) -> Vec<f64> {
    for row in locked.rows() {
        let r = row.as_slice().expect("contiguous rows");
        let c = dot(r, w);
        axpy(-c, r, w);
    }
    let coeffs: Vec<f64> = basis
        .rows()
        .into_iter()
        .map(|row| dot(row.as_slice().expect("contiguous rows"), w))
        .collect();
    for (row, &c) in basis.rows().into_iter().zip(&coeffs) {
        axpy(-c, row.as_slice().expect("contiguous rows"), w);
    }
    coeffs
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Random unit vector on the support, orthogonal to `basis` and `locked`.
/// Returns `None` when the complement is numerically empty.
fn random_direction(
    problem: &Problem,
    basis: ArrayView2<f64>,
    locked: ArrayView2<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    for _ in 0..3 {
        let mut w: Vec<f64> = problem
            .support
            .iter()
            .map(|&s| if s { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let before = norm(&w);
        orthogonalize(&mut w, basis, locked);
        let after = norm(&w);
        if after > 1e-8 * before {
            w.iter_mut().for_each(|v| *v /= after);
            return Some(w);
        }
    }
    None
}

/// Eigendecomposition of the leading `m × m` block, ascending.
fn small_eigh(t: &Array2<f64>, m: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let mat = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (t[[i, j]] + t[[j, i]]));
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Convergence { iterations: 0, residuals: vec![] })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok(((0..m).map(|i| s[i]).collect(), Array2::from_shape_fn((m, m), |(i, j)| u[(i, j)])))
}

/// The `nev` smallest eigenpairs of the operator restricted to the
/// complement of `locked`. Eigenvectors are returned as rows.
///
/// With `floor` set, the run gives up early (returning nothing) once the
/// lowest Ritz interval `θ ± r` lies entirely above `floor`.
fn lowest(
    problem: &Problem,
    nev: usize,
    locked: ArrayView2<f64>,
    floor: Option<f64>,
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
    stats: &mut SolverStats,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = problem.n;
    let free = problem.dim.saturating_sub(locked.nrows());
    if nev == 0 {
        return Ok((vec![], Array2::zeros((0, n))));
    }
    if nev > free {
        return Err(Error::Parameter(format!("{nev} eigenpairs requested from a {free}-dimensional space")));
    }
    let ncv = opts.ncv.unwrap_or((2 * nev + 16).max(40)).max(nev + 1).min(free);
    let mut basis = Array2::<f64>::zeros((ncv + 1, n));
    let mut t = Array2::<f64>::zeros((ncv, ncv));
    stats.workspace_bytes = stats
        .workspace_bytes
        .max(8 * ((ncv + 1) * n + locked.len() + ncv * ncv));

    let start = random_direction(problem, basis.slice(s![..0, ..]), locked, rng).ok_or_else(|| {
        Error::Parameter("no free direction to start the Krylov iteration".into())
    })?;
    basis.row_mut(0).assign(&Array1::from(start));

    let mut kept = 0;
    let mut w = vec![0.0; n];
    let mut last_residuals = Vec::new();
    for cycle in 0..=opts.max_restarts {
        let mut m = ncv;
        let mut beta = 0.0;
        let mut exhausted = false;
        for j in kept..ncv {
            {
                let v = basis.row(j);
                (problem.apply)(v.as_slice().expect("contiguous rows"), &mut w);
            }
            stats.matvecs += 1;
            let h = if j > kept {
                // three-term step, then one full reorthogonalization pass
                let vj = basis.row(j);
                let vj = vj.as_slice().expect("contiguous rows");
                let alpha = dot(vj, &w);
                axpy(-alpha, vj, &mut w);
                let beta_prev = t[[j, j - 1]];
                axpy(-beta_prev, basis.row(j - 1).as_slice().expect("contiguous rows"), &mut w);
                let mut h = reorthogonalize(&mut w, basis.slice(s![..=j, ..]), locked);
                h[j] += alpha;
                h[j - 1] += beta_prev;
                h
            } else {
                orthogonalize(&mut w, basis.slice(s![..=j, ..]), locked)
            };
            for (i, &hi) in h.iter().enumerate() {
                t[[i, j]] = hi;
                t[[j, i]] = hi;
            }
            let scale = t[[j, j]].abs().max(1.0);
            beta = norm(&w);
            if beta > 1e-12 * scale {
                w.iter_mut().for_each(|x| *x /= beta);
                basis.row_mut(j + 1).assign(&Array1::from(w.clone()));
                if j + 1 < ncv {
                    t[[j + 1, j]] = beta;
                    t[[j, j + 1]] = beta;
                }
            } else {
                beta = 0.0;
                match random_direction(problem, basis.slice(s![..=j, ..]), locked, rng) {
                    Some(fresh) => basis.row_mut(j + 1).assign(&Array1::from(fresh)),
                    None => {
                        m = j + 1;
                        exhausted = true;
                        break;
                    }
                }
            }
        }

        let (theta, svec) = small_eigh(&t, m)?;
        let residuals: Vec<f64> = (0..m).map(|i| (beta * svec[[m - 1, i]]).abs()).collect();
        let want = nev.min(m);
        if let Some(f) = floor {
            if theta[0] - residuals[0] > f {
                return Ok((vec![], Array2::zeros((0, n))));
            }
        }
        let converged = exhausted || residuals[..want].iter().all(|&r| r <= opts.tol);
        if converged {
            let coeffs = svec.slice(s![.., ..want]).t().to_owned();
            let vecs = coeffs.dot(&basis.slice(s![..m, ..]));
            return Ok((theta[..want].to_vec(), vecs));
        }
        last_residuals = residuals[..want].to_vec();
        if cycle == opts.max_restarts {
            break;
        }

        stats.restarts += 1;
        let nk = (nev + (m - nev) / 2).min(m - 1).max(nev);
        let coeffs = svec.slice(s![.., ..nk]).t().to_owned();
        let ritz = coeffs.dot(&basis.slice(s![..m, ..]));
        let residual_dir = basis.row(m).to_owned();
        basis.slice_mut(s![..nk, ..]).assign(&ritz);
        basis.row_mut(nk).assign(&residual_dir);
        t.fill(0.0);
        for i in 0..nk {
            t[[i, i]] = theta[i];
            let c = beta * svec[[m - 1, i]];
            t[[i, nk]] = c;
            t[[nk, i]] = c;
        }
        kept = nk;
    }
    Err(Error::Convergence {
        iterations: opts.max_restarts,
        residuals: last_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_laplacian, Graph};
    use crate::spectral::{full_eigh, principal_angles};

    fn opts(tol: f64) -> LanczosOptions {
        LanczosOptions { tol, ..Default::default() }
    }

    #[test]
    fn path_kernel_is_sqrt_degree() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let l = normalized_laplacian(&g);
        let d = extremal_eigs(&l, 1, 0, &opts(1e-10)).unwrap();
        assert!(d.eigenvalues[0].abs() < 1e-10);
        let expect: Vec<f64> = [1.0f64, 2.0, 2.0, 1.0].iter().map(|x| (x / 6.0).sqrt()).collect();
        for i in 0..4 {
            assert!((d.eigenvectors[[i, 0]] - expect[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn bipartite_top_is_two() {
        let g = Graph::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let l = normalized_laplacian(&g);
        let d = extremal_eigs(&l, 0, 1, &opts(1e-10)).unwrap();
        let dense = full_eigh(&l).unwrap();
        assert!((d.eigenvalues[0] - dense.eigenvalues[3]).abs() < 1e-10);
        assert!((d.eigenvalues[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn repeated_null_space_is_found() {
        // three disjoint triangles: λ = 0 three times, then 1.5 six times
        let mut edges = vec![];
        for b in 0..3 {
            let o = 3 * b;
            edges.extend([(o, o + 1), (o + 1, o + 2), (o, o + 2)]);
        }
        let g = Graph::from_edges(9, &edges).unwrap();
        let l = normalized_laplacian(&g);
        let d = extremal_eigs(&l, 4, 2, &opts(1e-10)).unwrap();
        let vals: Vec<f64> = d.eigenvalues.to_vec();
        assert!(vals[..3].iter().all(|v| v.abs() < 1e-9), "{vals:?}");
        assert!(vals[3..].iter().all(|v| (v - 1.5).abs() < 1e-9), "{vals:?}");
        assert!(d.orthonormality_error() < 1e-9);
    }

    #[test]
    fn isolated_nodes_are_deflated() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4)]).unwrap();
        let l = normalized_laplacian(&g);
        let d = extremal_eigs(&l, 3, 2, &opts(1e-10)).unwrap();
        assert!(d.eigenvalues.iter().take(3).all(|v| v.abs() < 1e-9));
        assert!(d.max_residual(&l) < 1e-9);
        assert!((d.eigenvalues[4] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_oversized_requests() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let l = normalized_laplacian(&g);
        assert!(matches!(extremal_eigs(&l, 2, 2, &opts(1e-8)), Err(Error::Parameter(_))));
    }

    #[test]
    fn matches_dense_on_small_sbm() {
        let params = crate::graph::sbm_from_homophily(300, 2, 8.0, 0.2).unwrap();
        let g = crate::graph::sbm_generate(&params, 3).unwrap();
        let l = normalized_laplacian(&g);
        let dense = full_eigh(&l).unwrap();
        let ext = extremal_eigs(&l, 3, 3, &opts(1e-10)).unwrap();
        let n = dense.len();
        for j in 0..3 {
            assert!((ext.eigenvalues[j] - dense.eigenvalues[j]).abs() < 1e-8);
            assert!((ext.eigenvalues[3 + j] - dense.eigenvalues[n - 3 + j]).abs() < 1e-8);
        }
        let ang = principal_angles(ext.eigenvectors.slice(s![.., ..3]), dense.eigenvectors.slice(s![.., ..3]))
            .unwrap();
        assert!(ang.iter().all(|&a| a < 1e-6), "{ang:?}");
    }

    #[test]
    fn reports_non_convergence() {
        let params = crate::graph::sbm_from_homophily(400, 2, 6.0, 0.5).unwrap();
        let g = crate::graph::sbm_generate(&params, 1).unwrap();
        let l = normalized_laplacian(&g);
        let o = LanczosOptions { tol: 1e-13, max_restarts: 1, ncv: Some(12), seed: 0 };
        match extremal_eigs(&l, 4, 0, &o) {
            Err(Error::Convergence { residuals, .. }) => assert!(!residuals.is_empty()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
