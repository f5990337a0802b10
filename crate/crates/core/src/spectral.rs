//! The symmetric tridiagonal family `B(λ)` and its Perron pair.
//!
//! `B(λ)` is `(n+2) × (n+2)`, zero on the diagonal, with off-diagonal
//! entries `λ_i^{-1/2}` for `i = 0..=n`. It is nonnegative and irreducible,
//! so its largest eigenvalue is simple and has a strictly positive
//! eigenvector.
//!
//! The Perron root is located by Sturm-count bisection. The vector is built
//! from ratio recurrences run in from both ends of the chain, which keeps
//! every entry accurate relative to its own size even when entries span
//! many orders of magnitude. Should that fail, inverse iteration with a
//! shift just above the root is used; there `B − μI` is negative definite
//! and its `LDLᵀ` factorization needs no pivoting. [`perron_power`] is an
//! independent shifted power iteration kept for cross-checks on small
//! matrices.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative eigen-residual target.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Positive transition rates `λ_0..λ_n` of a chain with `n` sites.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    /// Validates that there are at least two rates and all are finite and positive.
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::domain(format!(
                "a chain needs at least 2 rates (n >= 1), got {}",
                rates.len()
            )));
        }
        if let Some((index, &value)) = rates
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x > 0.0 && x.is_finite()))
        {
            return Err(Error::NonPositiveRate { index, value });
        }
        Ok(RateVector(rates))
    }

    /// The all-ones vector `1_{n+1}`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n + 1])
    }

    /// Number of sites `n` (one less than the number of rates).
    pub fn n(&self) -> usize {
        self.0.len() - 1
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `c·λ` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|x| c * x).collect())
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Zero-diagonal symmetric tridiagonal matrix with positive off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagSymMatrix {
    offdiag: Vec<f64>,
}

impl TridiagSymMatrix {
    pub fn new(offdiag: Vec<f64>) -> Result<Self> {
        if offdiag.is_empty() {
            return Err(Error::domain(
                "matrix needs at least one off-diagonal entry",
            ));
        }
        if let Some((index, &value)) = offdiag
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x > 0.0 && x.is_finite()))
        {
            return Err(Error::NonPositiveRate { index, value });
        }
        Ok(TridiagSymMatrix { offdiag })
    }

    pub fn dim(&self) -> usize {
        self.offdiag.len() + 1
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// `y = B x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b = &self.offdiag;
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = 0.0;
            if i > 0 {
                s += b[i - 1] * x[i - 1];
            }
            if i + 1 < d {
                s += b[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Largest row sum, an upper bound on every eigenvalue magnitude.
    pub fn gershgorin_bound(&self) -> f64 {
        let b = &self.offdiag;
        (0..self.dim())
            .map(|i| {
                let left = if i > 0 { b[i - 1] } else { 0.0 };
                let right = b.get(i).copied().unwrap_or(0.0);
                left + right
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence / `LDLᵀ` inertia).
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut pivot = -x;
        if pivot < 0.0 {
            count += 1;
        }
        for &b in &self.offdiag {
            pivot = -x - b * b / guard_pivot(pivot);
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Bisection for the `k`-th smallest eigenvalue (0-based); returns the
    /// final bracket `(lo, hi)` with `count(hi) > k >= count(lo)`.
    fn bisect_eigenvalue(&self, k: usize) -> (f64, f64) {
        let bound = self.gershgorin_bound();
        let mut lo = -bound * (1.0 + 1e-12) - f64::MIN_POSITIVE;
        let mut hi = bound * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    /// Second-largest eigenvalue, used for gap diagnostics.
    pub fn second_eigenvalue(&self) -> f64 {
        let (lo, hi) = self.bisect_eigenvalue(self.dim() - 2);
        0.5 * (lo + hi)
    }
}

fn guard_pivot(p: f64) -> f64 {
    const TINY: f64 = 1e-300;
    if p.abs() < TINY {
        if p >= 0.0 {
            TINY
        } else {
            -TINY
        }
    } else {
        p
    }
}

/// Perron root `sigma` and unit-norm, strictly positive Perron vector `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronPair {
    pub sigma: f64,
    pub v: Vec<f64>,
    /// `‖Bv − σv‖_∞`.
    pub residual: f64,
}

/// `B(λ)`: off-diagonal entries `λ_i^{-1/2}`.
pub fn build_matrix(rates: &RateVector) -> TridiagSymMatrix {
    TridiagSymMatrix {
        offdiag: rates.as_slice().iter().map(|l| l.powf(-0.5)).collect(),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-3 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "tolerance must lie in (0, 1e-3], got {tol}"
        )))
    }
}

fn eigen_residual(matrix: &TridiagSymMatrix, sigma: f64, v: &[f64]) -> f64 {
    matrix
        .apply(v)
        .iter()
        .zip(v)
        .map(|(bv, vi)| (bv - sigma * vi).abs())
        .fold(0.0, f64::max)
}

fn normalize(x: &mut [f64]) {
    let big = x.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    for t in x.iter_mut() {
        *t /= big;
    }
    let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let sign = if x.iter().sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    for t in x.iter_mut() {
        *t *= sign / norm;
    }
}

fn rayleigh(matrix: &TridiagSymMatrix, v: &[f64]) -> f64 {
    matrix.apply(v).iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Solves `(B − shift·I) x = rhs` in place using the `LDLᵀ` recurrence of
/// the Sturm count. Valid when the shift lies above the spectrum.
fn shifted_solve(matrix: &TridiagSymMatrix, shift: f64, rhs: &mut [f64]) {
    let b = matrix.offdiag();
    let d = rhs.len();
    let mut pivots = Vec::with_capacity(d);
    let mut p = -shift;
    pivots.push(guard_pivot(p));
    for i in 1..d {
        let l = b[i - 1] / pivots[i - 1];
        rhs[i] -= l * rhs[i - 1];
        p = -shift - b[i - 1] * l;
        pivots.push(guard_pivot(p));
    }
    rhs[d - 1] /= pivots[d - 1];
    for i in (0..d - 1).rev() {
        rhs[i] = (rhs[i] - b[i] * rhs[i + 1]) / pivots[i];
    }
}

/// Eigenvector for `sigma` from the ratio recurrences `v_{i+1}/v_i` run
/// down from the first row and `v_{i-1}/v_i` run up from the last row,
/// joined at the row whose equation is best satisfied (a twisted
/// factorization). Only ratios of positive numbers are multiplied, so tiny
/// entries keep their relative accuracy. `None` if no admissible join exists.
fn twisted_vector(matrix: &TridiagSymMatrix, sigma: f64) -> Option<Vec<f64>> {
    let b = matrix.offdiag();
    let dim = matrix.dim();
    let mut down = vec![f64::NAN; dim - 1];
    for i in 0..dim - 1 {
        let left = if i == 0 { 0.0 } else { b[i - 1] / down[i - 1] };
        let ratio = (sigma - left) / b[i];
        if !(ratio > 0.0 && ratio.is_finite()) {
            break;
        }
        down[i] = ratio;
    }
    let mut up = vec![f64::NAN; dim];
    for i in (1..dim).rev() {
        let right = if i == dim - 1 { 0.0 } else { b[i] / up[i + 1] };
        let ratio = (sigma - right) / b[i - 1];
        if !(ratio > 0.0 && ratio.is_finite()) {
            break;
        }
        up[i] = ratio;
    }
    let gamma = |k: usize| {
        let left = if k == 0 { 0.0 } else { b[k - 1] / down[k - 1] };
        let right = if k == dim - 1 { 0.0 } else { b[k] / up[k + 1] };
        (left + right - sigma).abs()
    };
    let twist = (0..dim)
        .filter(|&k| (k == 0 || down[k - 1].is_finite()) && (k == dim - 1 || up[k + 1].is_finite()))
        .min_by(|&x, &y| gamma(x).total_cmp(&gamma(y)))?;
    let mut log_v = vec![0.0; dim];
    for j in (0..twist).rev() {
        log_v[j] = log_v[j + 1] - down[j].ln();
    }
    for j in twist + 1..dim {
        log_v[j] = log_v[j - 1] - up[j].ln();
    }
    let top = log_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = log_v.iter().map(|l| (l - top).exp()).collect();
    normalize(&mut v);
    Some(v)
}

/// Perron pair of `matrix` with `‖Bv − σv‖_∞ ≤ tol·σ`.
pub fn perron(matrix: &TridiagSymMatrix, tol: f64) -> Result<PerronPair> {
    check_tol(tol)?;
    let dim = matrix.dim();
    let (lo, hi) = matrix.bisect_eigenvalue(dim - 1);
    let root = 0.5 * (lo + hi);

    if let Some(v) = twisted_vector(matrix, root) {
        if v.iter().all(|&t| t > 0.0) {
            let sigma = rayleigh(matrix, &v);
            let residual = eigen_residual(matrix, sigma, &v);
            if residual <= tol * sigma {
                return Ok(PerronPair { sigma, v, residual });
            }
        }
    }
    inverse_iteration(matrix, lo, hi, tol)
}

fn inverse_iteration(matrix: &TridiagSymMatrix, lo: f64, hi: f64, tol: f64) -> Result<PerronPair> {
    let dim = matrix.dim();
    let mut shift = hi;
    let budget = 100 * dim;
    let mut v = vec![1.0; dim];
    let mut sigma = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let mut x = v.clone();
        shifted_solve(matrix, shift, &mut x);
        if !x.iter().all(|t| t.is_finite()) {
            // pivot underflow right at the root; back the shift off
            shift += 64.0 * f64::EPSILON * shift.abs().max(f64::MIN_POSITIVE);
            continue;
        }
        normalize(&mut x);
        v = x;
        sigma = rayleigh(matrix, &v);
        residual = eigen_residual(matrix, sigma, &v);
        if iterations >= 2 && residual <= tol * sigma {
            break;
        }
    }
    if !(residual <= tol * sigma) {
        return Err(Error::NoConvergence {
            what: "Perron inverse iteration",
            iterations,
            residual,
        });
    }
    if let Some(i) = v.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::Numerical(format!(
            "Perron vector entry {i} is not positive ({:e})",
            v[i]
        )));
    }
    Ok(PerronPair { sigma, v, residual })
}

/// Perron pair of `B(λ)` at the default tolerance.
pub fn perron_of(rates: &RateVector) -> Result<PerronPair> {
    perron(&build_matrix(rates), DEFAULT_TOL)
}

/// Shifted power iteration with Rayleigh-quotient shift updates.
///
/// Converges like `((σ₂ + c)/(σ + c))^k`, so it is only practical for short
/// chains. Kept as an algorithmically independent check on [`perron`].
pub fn perron_power(matrix: &TridiagSymMatrix, tol: f64, max_iter: usize) -> Result<PerronPair> {
    check_tol(tol)?;
    let dim = matrix.dim();
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut shift = matrix.gershgorin_bound();
    let mut sigma = rayleigh(matrix, &v);
    let mut residual = eigen_residual(matrix, sigma, &v);
    for _ in 0..max_iter {
        if residual <= tol * sigma {
            break;
        }
        let mut x = matrix.apply(&v);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += shift * vi;
        }
        normalize(&mut x);
        v = x;
        sigma = rayleigh(matrix, &v);
        // keep the shift positive so that +σ dominates −σ
        shift = sigma.max(f64::MIN_POSITIVE);
        residual = eigen_residual(matrix, sigma, &v);
    }
    if !(residual <= tol * sigma) {
        return Err(Error::NoConvergence {
            what: "Perron power iteration",
            iterations: max_iter,
            residual,
        });
    }
    Ok(PerronPair { sigma, v, residual })
}

/// Closed-form Perron pair of `B(1_{n+1})`: `σ = 2cos(π/(n+3))`,
/// `v_i = √(2/(n+3))·sin(iπ/(n+3))`.
pub fn toeplitz_oracle(n: usize) -> Result<PerronPair> {
    if n < 1 {
        return Err(Error::domain("the chain needs at least one site (n >= 1)"));
    }
    let m = (n + 3) as f64;
    let theta = std::f64::consts::PI / m;
    let sigma = 2.0 * theta.cos();
    let scale = (2.0 / m).sqrt();
    let v = (1..=n + 2)
        .map(|i| scale * (i as f64 * theta).sin())
        .collect();
    Ok(PerronPair {
        sigma,
        v,
        residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_rates() {
        assert_eq!(
            RateVector::new(vec![1.0, 0.0, 2.0]),
            Err(Error::NonPositiveRate {
                index: 1,
                value: 0.0
            })
        );
        assert!(matches!(
            RateVector::new(vec![1.0, -3.0]),
            Err(Error::NonPositiveRate { index: 1, .. })
        ));
        assert!(RateVector::new(vec![1.0]).is_err());
        assert!(RateVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(toeplitz_oracle(0).is_err());
    }

    #[test]
    fn build_matrix_examples() {
        let m = build_matrix(&RateVector::new(vec![1.0, 1.0]).unwrap());
        assert_eq!(m.dim(), 3);
        assert_eq!(m.offdiag(), &[1.0, 1.0]);

        let m = build_matrix(&RateVector::new(vec![4.0; 3]).unwrap());
        assert_eq!(m.offdiag(), &[0.5, 0.5, 0.5]);

        let m = build_matrix(&RateVector::new(vec![0.8284, 1.1716, 1.1716, 0.8284]).unwrap());
        for (got, want) in m.offdiag().iter().zip([1.0988, 0.9239, 0.9239, 1.0988]) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn n1_pair() {
        let p = perron_of(&RateVector::ones(1).unwrap()).unwrap();
        assert_relative_eq!(p.sigma, 2f64.sqrt(), epsilon = 1e-14);
        let s = 2f64.sqrt();
        let w = [0.5, s / 2.0, 0.5];
        for (a, b) in p.v.iter().zip(w) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn sturm_count_matches_toeplitz_spectrum() {
        let n = 7;
        let m = build_matrix(&RateVector::ones(n).unwrap());
        // eigenvalues 2cos(kπ/(n+3)), k = 1..n+2
        let mut eig: Vec<f64> = (1..=n + 2)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n + 3) as f64).cos())
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, w) in eig.iter().enumerate() {
            assert_eq!(m.sturm_count(w - 1e-9), k);
            assert_eq!(m.sturm_count(w + 1e-9), k + 1);
        }
        assert_relative_eq!(m.second_eigenvalue(), eig[n], epsilon = 1e-12);
    }

    #[test]
    fn power_iteration_agrees_on_short_chains() {
        let rates = RateVector::new(vec![0.7, 1.3, 0.9, 2.0, 0.5]).unwrap();
        let m = build_matrix(&rates);
        let a = perron(&m, 1e-12).unwrap();
        let b = perron_power(&m, 1e-12, 100_000).unwrap();
        assert_relative_eq!(a.sigma, b.sigma, max_relative = 1e-11);
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn tolerance_is_validated() {
        let m = build_matrix(&RateVector::ones(2).unwrap());
        assert!(perron(&m, 0.0).is_err());
        assert!(perron(&m, 1e-2).is_err());
        assert!(perron(&m, 1e-3).is_ok());
    }
}
