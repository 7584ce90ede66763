//! Chebyshev polynomials of the first kind on [-1, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Round-off slack tolerated outside [-1, 1] before an input is rejected.
pub const CLAMP_SLACK: f64 = 1e-9;

/// Clamps `x` into [-1, 1] if it is within [`CLAMP_SLACK`] of the interval.
pub fn clamp_unit(x: f64) -> Result<f64> {
    if x.abs() <= 1.0 {
        Ok(x)
    } else if x.abs() <= 1.0 + CLAMP_SLACK {
        Ok(x.signum())
    } else {
        Err(Error::Parameter(format!("{x} lies outside [-1, 1]")))
    }
}

/// Truncated series `Σ_m coeffs[m]·T_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("series needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("series coefficients must be finite".into()));
        }
        Ok(ChebyshevSeries { coeffs })
    }

    pub fn zero(order: usize) -> Self {
        ChebyshevSeries { coeffs: vec![0.0; order + 1] }
    }

    /// Polynomial order M (the series has M + 1 coefficients).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(clenshaw(&self.coeffs, clamp_unit(x)?))
    }
}

pub(crate) fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs[1..].iter().rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + x * b1 - b2
}

/// Fills `out` with `T_0(x), …, T_{out.len()-1}(x)` without range checks.
pub(crate) fn basis_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for m in 2..out.len() {
        out[m] = 2.0 * x * out[m - 1] - out[m - 2];
    }
}

/// `(T_0(x), …, T_M(x))` by the three-term recurrence.
pub fn cheb_basis(x: f64, order: usize) -> Result<Vec<f64>> {
    let x = clamp_unit(x)?;
    let mut out = vec![0.0; order + 1];
    basis_into(x, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitMethod {
    /// Chebyshev–Gauss quadrature on 4(M+1) nodes.
    Quadrature,
    /// Normal equations over the given sample points.
    LeastSquares { samples: Vec<f64> },
}

/// Chebyshev–Gauss nodes `cos(π(k + 1/2)/N)`.
pub fn gauss_nodes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / count as f64).cos())
        .collect()
}

/// Order-M Chebyshev approximation of `f`.
pub fn cheb_fit(f: impl Fn(f64) -> f64, order: usize, method: &FitMethod) -> Result<ChebyshevSeries> {
    let width = order + 1;
    match method {
        FitMethod::Quadrature => {
            let nodes = gauss_nodes(4 * width);
            let scale = 2.0 / nodes.len() as f64;
            let mut coeffs = vec![0.0; width];
            let mut basis = vec![0.0; width];
            for &x in &nodes {
                let fx = f(x);
                if !fx.is_finite() {
                    return Err(Error::Fitting(format!("target is not finite at {x}")));
                }
                basis_into(x, &mut basis);
                for (c, t) in coeffs.iter_mut().zip(&basis) {
                    *c += scale * fx * t;
                }
            }
            coeffs[0] *= 0.5;
            ChebyshevSeries::new(coeffs)
        }
        FitMethod::LeastSquares { samples } => {
            let mut gram = vec![0.0; width * width];
            let mut rhs = vec![0.0; width];
            let mut basis = vec![0.0; width];
            for &x in samples {
                let x = clamp_unit(x)?;
                let fx = f(x);
                if !fx.is_finite() {
                    return Err(Error::Fitting(format!("target is not finite at {x}")));
                }
                basis_into(x, &mut basis);
                for a in 0..width {
                    rhs[a] += basis[a] * fx;
                    for b in 0..width {
                        gram[a * width + b] += basis[a] * basis[b];
                    }
                }
            }
            cholesky_solve(&mut gram, &mut rhs, width)?;
            ChebyshevSeries::new(rhs)
        }
    }
}

/// Solves `G c = r` in place for symmetric positive definite `G`.
fn cholesky_solve(g: &mut [f64], r: &mut [f64], n: usize) -> Result<()> {
    let scale = (0..n).map(|i| g[i * n + i]).fold(0.0, f64::max);
    let floor = scale * 1e-13;
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= g[j * n + k] * g[j * n + k];
        }
        if !(d > floor) {
            return Err(Error::Fitting(format!(
                "least-squares system is rank deficient at column {j}"
            )));
        }
        let d = d.sqrt();
        g[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = r[i];
        for k in 0..i {
            s -= g[i * n + k] * r[k];
        }
        r[i] = s / g[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = r[i];
        for k in i + 1..n {
            s -= g[k * n + i] * r[k];
        }
        r[i] = s / g[i * n + i];
    }
    Ok(())
}

/// `T̃_m = T_m / 2^{m−1}` (monic), with `T̃_0 = 1`.
pub fn monic_cheb_eval(m: usize, x: f64) -> Result<f64> {
    let x = clamp_unit(x)?;
    let mut basis = vec![0.0; m + 1];
    basis_into(x, &mut basis);
    Ok(basis[m] * monic_scale(m))
}

pub(crate) fn monic_scale(m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        2f64.powi(1 - m as i32)
    }
}

/// Sup-norm of `T̃_m` on [-1, 1].
pub fn monic_infnorm(m: usize) -> f64 {
    monic_scale(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn trig(m: usize, x: f64) -> f64 {
        (m as f64 * x.acos()).cos()
    }

    #[test]
    fn basis_examples() {
        assert_eq!(cheb_basis(1.0, 4).unwrap(), vec![1.0; 5]);
        assert_eq!(cheb_basis(-1.0, 3).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(cheb_basis(0.5, 2).unwrap(), vec![1.0, 0.5, -0.5]);
    }

    #[test]
    fn clamping() {
        assert_eq!(cheb_basis(1.0 + 5e-10, 1).unwrap(), vec![1.0, 1.0]);
        assert!(cheb_basis(1.0 + 1e-6, 1).is_err());
        assert!(cheb_basis(f64::NAN, 1).is_err());
    }

    #[test]
    fn recurrence_matches_trig_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let b = cheb_basis(x, 20).unwrap();
            for (m, v) in b.iter().enumerate() {
                assert!((v - trig(m, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clenshaw_matches_basis_sum() {
        let s = ChebyshevSeries::new(vec![0.3, -1.2, 0.5, 2.0, -0.1]).unwrap();
        for &x in &[-1.0, -0.3, 0.0, 0.77, 1.0] {
            let direct: f64 = cheb_basis(x, 4).unwrap().iter().zip(s.coeffs()).map(|(t, c)| t * c).sum();
            assert!((s.eval(x).unwrap() - direct).abs() < 1e-13);
        }
        assert_eq!(ChebyshevSeries::new(vec![2.5]).unwrap().eval(0.1).unwrap(), 2.5);
    }

    #[test]
    fn fit_reproduces_basis_functions() {
        for method in [
            FitMethod::Quadrature,
            FitMethod::LeastSquares { samples: (0..50).map(|i| -1.0 + i as f64 / 24.5).collect() },
        ] {
            let s = cheb_fit(|x| x, 5, &method).unwrap();
            for (m, c) in s.coeffs().iter().enumerate() {
                assert!((c - if m == 1 { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            let s = cheb_fit(|x| trig(3, x), 5, &method).unwrap();
            for (m, c) in s.coeffs().iter().enumerate() {
                assert!((c - if m == 3 { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn diffusion_kernel_fit() {
        let f = |x: f64| (-2.0 * (x + 1.0)).exp();
        let s = cheb_fit(f, 32, &FitMethod::Quadrature).unwrap();
        let err = (0..=1000)
            .map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
            .map(|x| (s.eval(x).unwrap() - f(x)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "sup error {err}");
    }

    #[test]
    fn least_squares_rank_deficiency() {
        let res = cheb_fit(|x| x, 4, &FitMethod::LeastSquares { samples: vec![0.1, 0.2, 0.3] });
        assert!(matches!(res, Err(Error::Fitting(_))));
    }

    #[test]
    fn monic_norms() {
        assert_eq!(monic_infnorm(0), 1.0);
        assert_eq!(monic_infnorm(3), 0.25);
        let grid_max = (0..10001)
            .map(|i| -1.0 + 2.0 * i as f64 / 10000.0)
            .map(|x| monic_cheb_eval(5, x).unwrap().abs())
            .fold(0.0, f64::max);
        assert!((grid_max - 2f64.powi(-4)).abs() < 1e-9);
    }

    fn monic_poly_eval(lower: &[f64], m: usize, x: f64) -> f64 {
        // monic degree-m polynomial: T̃_m + Σ_{j<m} lower[j]·T_j
        let mut b = vec![0.0; m + 1];
        basis_into(x, &mut b);
        b[m] * monic_scale(m) + lower.iter().zip(&b).map(|(c, t)| c * t).sum::<f64>()
    }

    proptest! {
        #[test]
        fn fit_round_trips_polynomials(coeffs in proptest::collection::vec(-3.0f64..3.0, 1..12)) {
            let order = coeffs.len() - 1;
            let target = ChebyshevSeries::new(coeffs.clone()).unwrap();
            let fit = cheb_fit(|x| target.eval(x).unwrap(), order + 3, &FitMethod::Quadrature).unwrap();
            for (m, c) in fit.coeffs().iter().enumerate() {
                let expect = coeffs.get(m).copied().unwrap_or(0.0);
                prop_assert!((c - expect).abs() < 1e-10);
            }
        }

        #[test]
        fn monic_minimality_witness(m in 1usize..12, lower in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let scale = monic_scale(m);
            let lower: Vec<f64> = lower[..m].iter().map(|c| c * scale).collect();
            // uniform grid plus the alternation points of T_m
            let grid = (0..10001)
                .map(|i| -1.0 + 2.0 * i as f64 / 10000.0)
                .chain((0..=m).map(|k| (std::f64::consts::PI * k as f64 / m as f64).cos()));
            let sup = grid.map(|x| monic_poly_eval(&lower, m, x).abs()).fold(0.0, f64::max);
            prop_assert!(sup >= scale - 1e-9, "sup {} < {}", sup, scale);
        }
    }
}
