//! Shooting on the one-parameter recursion `a_{i-1} + a_{i+1} = r a_i²`.
//!
//! With `a_0 = 0`, `a_1 = 1` the whole sequence is a function of `r`. The
//! optimum is the `r` for which the sequence is symmetric about its middle,
//! and the optimal rates are `λ_i ∝ a_{i+1} a_{i+2}`.
//!
//! Forward iteration amplifies errors by roughly `2 + √3` per step, so the
//! root found by bisection is polished by a Newton solve of the half
//! boundary value problem written in the deviations `d_i = q − a_i`, which
//! keeps full relative precision in the tiny values near the middle.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values beyond this magnitude are reported as divergence.
pub const OVERFLOW_GUARD: f64 = 1e6;
/// Residual returned by [`shoot_residual`] when the sequence leaves `(0, q)`.
pub const SATURATED: f64 = 1e6;

/// `r`, `q = 2/r` and the sequence `a_0, a_1, …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionProfile {
    pub n: usize,
    pub r: f64,
    pub q: f64,
    pub a: Vec<f64>,
    /// `q − a_i`, computed directly where possible rather than by subtraction.
    pub deviation: Vec<f64>,
}

/// Index of the last entry materialized in half mode.
pub fn half_len(n: usize) -> usize {
    (n + 3) / 2 + 1
}

/// Iterates `a_{i+1} = r a_i² − a_{i−1}` from `a_0 = 0`, `a_1 = 1`, through
/// `a_{n+3}` or, with `half_only`, through `a_{⌊(n+3)/2⌋+1}`.
pub fn recursion_profile(r: f64, n: usize, half_only: bool) -> Result<RecursionProfile> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("r must be positive, got {r}")));
    }
    if n < 1 {
        return Err(Error::domain("the chain needs at least one site (n >= 1)"));
    }
    let last = if half_only { half_len(n) } else { n + 3 };
    let mut a = Vec::with_capacity(last + 1);
    a.push(0.0);
    a.push(1.0);
    for i in 1..last {
        let next = r * a[i] * a[i] - a[i - 1];
        if !(next.abs() <= OVERFLOW_GUARD) {
            return Err(Error::Diverged {
                index: i + 1,
                value: next,
            });
        }
        a.push(next);
    }
    let q = 2.0 / r;
    let deviation = a.iter().map(|x| q - x).collect();
    Ok(RecursionProfile {
        n,
        r,
        q,
        a,
        deviation,
    })
}

/// Midpoint symmetry defect: `a_m − a_{m+1}` with `m = (n+2)/2` for even
/// `n`, and `a_{(n+1)/2} − a_{(n+5)/2}` for odd `n`.
///
/// Positive when `r` is below the root. If the sequence reaches `q` (too
/// large `r`) the result is `−1e6`; if it drops to zero or below (too small
/// `r`) it is `+1e6`, so bisection brackets survive.
pub fn shoot_residual(r: f64, n: usize) -> f64 {
    let q = 2.0 / r;
    let last = half_len(n);
    let mut a = Vec::with_capacity(last + 1);
    a.push(0.0);
    a.push(1.0);
    for i in 1..last {
        let next = r * a[i] * a[i] - a[i - 1];
        if next >= q {
            return -SATURATED;
        }
        if next <= 0.0 {
            return SATURATED;
        }
        a.push(next);
    }
    if n.is_multiple_of(2) {
        let m = (n + 2) / 2;
        a[m] - a[m + 1]
    } else {
        a[n.div_ceil(2)] - a[(n + 5) / 2]
    }
}

/// Lower end of the shooting bracket.
pub fn bracket_lo(n: usize) -> f64 {
    if n == 1 {
        1.0 + 1e-9
    } else {
        2f64.cbrt() + 1e-9
    }
}

/// Upper end of the shooting bracket.
pub fn bracket_hi() -> f64 {
    2f64.sqrt()
}

fn bisect(n: usize, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize) {
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if shoot_residual(mid, n) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), iterations)
}

/// Root of [`shoot_residual`] to bracket width `tol`, with the number of
/// bisection steps and whether the grid-scan fallback was needed.
pub fn shoot_root(n: usize, tol: f64) -> Result<(f64, usize, bool)> {
    let lo = bracket_lo(n);
    let hi = bracket_hi();
    if shoot_residual(lo, n) > 0.0 && shoot_residual(hi, n) < 0.0 {
        let (r, it) = bisect(n, lo, hi, tol);
        return Ok((r, it, false));
    }
    const GRID: f64 = 1e-4;
    let cells = ((hi - lo) / GRID).ceil() as usize;
    let mut prev = (lo, shoot_residual(lo, n));
    for k in 1..=cells {
        let x = (lo + k as f64 * GRID).min(hi);
        let g = shoot_residual(x, n);
        if prev.1 > 0.0 && g <= 0.0 {
            let (r, it) = bisect(n, prev.0, x, tol);
            return Ok((r, it + k, true));
        }
        prev = (x, g);
    }
    Err(Error::Bracket {
        what: "shooting",
        lo,
        hi,
    })
}

/// Number of free deviations in the half problem.
fn half_unknowns(n: usize) -> usize {
    if n.is_multiple_of(2) {
        (n + 2) / 2
    } else {
        (n + 3) / 2
    }
}

/// Mirror value `d_{M+1}` in terms of the unknowns.
fn mirror(d: &[f64], n: usize) -> f64 {
    let m = d.len() - 1;
    if n.is_multiple_of(2) {
        d[m]
    } else {
        d[m - 1]
    }
}

/// Residuals `(B, E_1..E_M)` of the half problem; `d[0]` is unused.
fn half_residuals(d: &[f64], r: f64, n: usize) -> (f64, Vec<f64>) {
    let m = d.len() - 1;
    let b = d[1] - 2.0 / r + 1.0;
    let e = (1..=m)
        .map(|i| {
            let left = if i == 1 { 2.0 / r } else { d[i - 1] };
            let right = if i == m { mirror(d, n) } else { d[i + 1] };
            left - 4.0 * d[i] + r * d[i] * d[i] + right
        })
        .collect();
    (b, e)
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `lower`,
/// diagonal `diag` and super-diagonal `upper` (first/last entries unused).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut x = vec![0.0; m];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..m {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < m { upper[i] / denom } else { 0.0 };
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

fn scaled_residual(d: &[f64], r: f64, n: usize) -> f64 {
    let (b, e) = half_residuals(d, r, n);
    let m = d.len() - 1;
    let mut worst = b.abs() / (d[1].abs() + 2.0 / r + 1.0);
    for i in 1..=m {
        let left = if i == 1 { 2.0 / r } else { d[i - 1] };
        let right = if i == m { mirror(d, n) } else { d[i + 1] };
        let scale = left.abs() + 4.0 * d[i].abs() + r * d[i] * d[i] + right.abs();
        worst = worst.max(e[i - 1].abs() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Initial deviations from forward iteration at `r`, continued by the
/// asymptotic decay rate `2 − √3` once forward iteration stops being
/// trustworthy.
fn initial_deviation(r: f64, n: usize) -> Vec<f64> {
    let m = half_unknowns(n);
    let alpha = 2.0 - 3f64.sqrt();
    let mut d = vec![0.0; m + 1];
    d[0] = 2.0 / r;
    d[1] = 2.0 / r - 1.0;
    let mut valid = true;
    for i in 2..=m {
        if valid {
            let next = 4.0 * d[i - 1] - r * d[i - 1] * d[i - 1] - d[i - 2];
            if next > 0.0 && next < d[i - 1] {
                d[i] = next;
                continue;
            }
            valid = false;
        }
        d[i] = d[i - 1] * alpha;
    }
    d
}

/// Newton solve of the half boundary value problem in `(d_1..d_M, r)`.
/// Returns `(d, r, iterations)` where `d[0] = 2/r`.
fn newton_deviation(r0: f64, n: usize) -> Result<(Vec<f64>, f64, usize)> {
    const MAX_ITER: usize = 50;
    let m = half_unknowns(n);
    let mut d = initial_deviation(r0, n);
    let mut r = r0;
    let mut res = scaled_residual(&d, r, n);
    for it in 1..=MAX_ITER {
        let (b, e) = half_residuals(&d, r, n);
        let mut lower = vec![1.0; m];
        let upper = vec![1.0; m];
        let mut diag: Vec<f64> = (1..=m).map(|i| -4.0 + 2.0 * r * d[i]).collect();
        if n.is_multiple_of(2) {
            diag[m - 1] += 1.0;
        } else if m >= 2 {
            lower[m - 1] = 2.0;
        }
        let border: Vec<f64> = (1..=m)
            .map(|i| {
                let sq = d[i] * d[i];
                if i == 1 {
                    sq - 2.0 / (r * r)
                } else {
                    sq
                }
            })
            .collect();
        let neg_e: Vec<f64> = e.iter().map(|x| -x).collect();
        let y = thomas(&lower, &diag, &upper, &neg_e);
        let z = thomas(&lower, &diag, &upper, &border);
        let dr = (-b - y[0]) / (2.0 / (r * r) - z[0]);
        let dd: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - zi * dr).collect();

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let r_new = r + step * dr;
            let mut d_new = d.clone();
            for i in 1..=m {
                d_new[i] = d[i] + step * dd[i - 1];
            }
            d_new[0] = 2.0 / r_new;
            let res_new = scaled_residual(&d_new, r_new, n);
            if res_new.is_finite() && (res_new <= res || res_new < 1e-15) {
                accepted = Some((d_new, r_new, res_new));
                break;
            }
            step *= 0.5;
        }
        let Some((d_new, r_new, res_new)) = accepted else {
            // no descent possible: already at rounding level
            return if res < 1e-13 {
                Ok((d, r, it))
            } else {
                Err(Error::NoConvergence {
                    what: "deviation Newton",
                    iterations: it,
                    residual: res,
                })
            };
        };
        let negligible = (dr * step).abs() <= 4.0 * f64::EPSILON * r
            && (1..=m).all(|i| {
                (step * dd[i - 1]).abs() <= 4.0 * f64::EPSILON * d[i].abs().max(f64::MIN_POSITIVE)
            });
        d = d_new;
        r = r_new;
        res = res_new;
        if negligible {
            return Ok((d, r, it));
        }
    }
    if res < 1e-13 {
        Ok((d, r, MAX_ITER))
    } else {
        Err(Error::NoConvergence {
            what: "deviation Newton",
            iterations: MAX_ITER,
            residual: res,
        })
    }
}

/// Optimal profile for `n`: bisection on [`shoot_residual`] followed by the
/// deviation Newton polish. Returns the full, mirrored profile together with
/// the iteration count and the grid-fallback flag.
pub fn optimal_profile(n: usize, tol: f64) -> Result<(RecursionProfile, usize, bool)> {
    if n < 1 {
        return Err(Error::domain("the chain needs at least one site (n >= 1)"));
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::domain(format!(
            "tolerance must lie in (0, 1e-6], got {tol}"
        )));
    }
    let (r0, bisections, fallback) = shoot_root(n, tol)?;
    let (d_half, r, newton) = newton_deviation(r0, n)?;
    if !(r > 0.0) || d_half[1..].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Numerical(
            "deviation Newton left the admissible region".to_string(),
        ));
    }
    let q = 2.0 / r;
    let deviation: Vec<f64> = (0..=n + 3)
        .map(|i| {
            let j = i.min(n + 3 - i);
            if j == 0 {
                q
            } else {
                d_half[j]
            }
        })
        .collect();
    let a: Vec<f64> = (0..=n + 3)
        .map(|i| {
            let j = i.min(n + 3 - i);
            match j {
                0 => 0.0,
                1 => 1.0,
                _ => q - deviation[i],
            }
        })
        .collect();
    Ok((
        RecursionProfile {
            n,
            r,
            q,
            a,
            deviation,
        },
        bisections + newton,
        fallback,
    ))
}

/// `F_s(u, v) = (s u² − v, u)`.
pub fn apply_f(s: f64, point: (f64, f64)) -> (f64, f64) {
    let (u, v) = point;
    (s * u * u - v, u)
}

/// Central-difference Jacobian of `F_s` at `point` with step `h`.
pub fn f_jacobian(s: f64, point: (f64, f64), h: f64) -> [[f64; 2]; 2] {
    let (u, v) = point;
    let du = {
        let p = apply_f(s, (u + h, v));
        let m = apply_f(s, (u - h, v));
        ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h))
    };
    let dv = {
        let p = apply_f(s, (u, v + h));
        let m = apply_f(s, (u, v - h));
        ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h))
    };
    [[du.0, dv.0], [du.1, dv.1]]
}

/// Real eigenvalues of a 2×2 matrix in ascending order.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> Result<(f64, f64)> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return Err(Error::Numerical("complex eigenvalues".to_string()));
    }
    let root = disc.sqrt();
    Ok((tr / 2.0 - root, tr / 2.0 + root))
}

/// Eigenvalues of the numeric Jacobian of `F_s` at its fixed point `(2/s, 2/s)`.
pub fn fixed_point_eigenvalues(s: f64) -> Result<(f64, f64)> {
    let q = 2.0 / s;
    eigenvalues_2x2(f_jacobian(s, (q, q), 1e-6))
}
