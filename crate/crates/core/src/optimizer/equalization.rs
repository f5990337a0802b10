//! Sensitivity equalization.
//!
//! All `s_i` are equal exactly when `λ_i^{3/2} ∝ v_{i+1} v_{i+2}`, which makes
//! the optimum a fixed point of `λ ↦ normalize((v_{i+1} v_{i+2})^{2/3})`.
//! Plain iteration of that map is unstable: its Jacobian at the optimum has
//! eigenvalues well below −1. The iteration is therefore run in log-rates
//! with Anderson acceleration and a small mixing parameter.

use nalgebra::{DMatrix, DVector};

use super::{assemble, Method, OptimalSolution, RecursionProfile};
use crate::error::{Error, Result};
use crate::spectral::{build_matrix, perron, PerronPair, RateVector, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizationOptions {
    /// Stop when the fixed-point map changes no rate by more than this, relatively.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson history length.
    pub depth: usize,
    /// Mixing parameter; `None` picks `1/(1 + 0.15 n²)`.
    pub beta: Option<f64>,
}

impl Default for EqualizationOptions {
    fn default() -> Self {
        EqualizationOptions {
            tol: 1e-10,
            max_iter: 10_000,
            depth: 10,
            beta: None,
        }
    }
}

fn normalize_log(x: &mut [f64], n: usize) {
    let shift = (x.iter().map(|t| t.exp()).sum::<f64>() / (n + 1) as f64).ln();
    for t in x.iter_mut() {
        *t -= shift;
    }
}

/// `ln` of the normalized update and the Perron pair it was computed from.
fn picard(x: &[f64], n: usize) -> Result<(Vec<f64>, PerronPair)> {
    let rates = RateVector::new(x.iter().map(|t| t.exp()).collect())?;
    let pair = perron(&build_matrix(&rates), DEFAULT_TOL)?;
    let mut g: Vec<f64> = pair
        .v
        .windows(2)
        .map(|w| (2.0 / 3.0) * (w[0] * w[1]).ln())
        .collect();
    normalize_log(&mut g, n);
    if g.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numerical(
            "non-finite equalization update".to_string(),
        ));
    }
    Ok((g, pair))
}

fn max_rel_change(g: &[f64], x: &[f64]) -> f64 {
    g.iter()
        .zip(x)
        .map(|(a, b)| (a - b).exp_m1().abs())
        .fold(0.0, |m, t| {
            if t.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(t)
            }
        })
}

/// [`solve_equalization_with`] using default depth and mixing.
pub fn solve_equalization(n: usize, tol: f64, max_iter: usize) -> Result<OptimalSolution> {
    solve_equalization_with(
        n,
        EqualizationOptions {
            tol,
            max_iter,
            ..EqualizationOptions::default()
        },
    )
}

/// Anderson-accelerated fixed-point solve starting from `1_{n+1}`.
///
/// When the residual grows by more than a factor of 100 over the best seen,
/// the iterate is reset to the best one, the history is cleared and the
/// mixing parameter is halved.
pub fn solve_equalization_with(n: usize, opts: EqualizationOptions) -> Result<OptimalSolution> {
    if n < 1 {
        return Err(Error::domain("the chain needs at least one site (n >= 1)"));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::domain(format!(
            "tolerance must lie in (0, 1), got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 || opts.depth == 0 {
        return Err(Error::domain("max_iter and depth must be positive"));
    }
    let mut beta = opts
        .beta
        .unwrap_or_else(|| 1.0 / (1.0 + 0.15 * (n * n) as f64));
    let dim = n + 1;
    let mut x = vec![0.0; dim];
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut fs: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_change = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let (g, _) = match picard(&x, n) {
            Ok(v) => v,
            Err(_) => {
                let Some((_, bx)) = &best else {
                    return Err(Error::Numerical(
                        "equalization failed at the starting point".to_string(),
                    ));
                };
                x = bx.clone();
                xs.clear();
                fs.clear();
                beta *= 0.5;
                continue;
            }
        };
        let change = max_rel_change(&g, &x);
        last_change = change;
        if change < opts.tol {
            return finish(x, n, it);
        }
        let f: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
        let norm = f.iter().map(|t| t.abs()).fold(0.0, f64::max);
        match &best {
            Some((b, bx)) if norm > 100.0 * b || !norm.is_finite() => {
                x = bx.clone();
                xs.clear();
                fs.clear();
                beta *= 0.5;
                continue;
            }
            Some((b, _)) if norm >= *b => {}
            _ => best = Some((norm, x.clone())),
        }

        xs.push(x.clone());
        fs.push(f.clone());
        if xs.len() > opts.depth + 1 {
            xs.remove(0);
            fs.remove(0);
        }
        let mut next: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + beta * b).collect();
        let k = xs.len() - 1;
        if k > 0 {
            let df = DMatrix::from_fn(dim, k, |r, c| fs[c + 1][r] - fs[c][r]);
            let rhs = DVector::from_column_slice(&f);
            let svd = df.svd(true, true);
            if let Ok(gamma) = svd.solve(&rhs, 1e-14) {
                for c in 0..k {
                    for r in 0..dim {
                        let dx = xs[c + 1][r] - xs[c][r];
                        let dfr = fs[c + 1][r] - fs[c][r];
                        next[r] -= (dx + beta * dfr) * gamma[c];
                    }
                }
            }
        }
        normalize_log(&mut next, n);
        x = next;
    }
    Err(Error::NoConvergence {
        what: "sensitivity equalization",
        iterations: opts.max_iter,
        residual: last_change,
    })
}

fn finish(log_rates: Vec<f64>, n: usize, iterations: usize) -> Result<OptimalSolution> {
    let rates = RateVector::new(log_rates.iter().map(|t| t.exp()).collect())?;
    let pair = perron(&build_matrix(&rates), DEFAULT_TOL)?;
    let sigma = pair.sigma;
    let r = sigma.powf(2.0 / 3.0) * rates[0].powf(1.0 / 3.0);
    let q = 2.0 / r;
    let v1 = pair.v[0];
    let mut a: Vec<f64> = Vec::with_capacity(n + 4);
    a.push(0.0);
    a.extend(pair.v.iter().map(|vi| (vi / v1).powf(2.0 / 3.0)));
    a.push(0.0);
    let deviation = a.iter().map(|x| q - x).collect();
    let top = 4.0 / (sigma * sigma);
    let gaps = rates.as_slice().iter().map(|l| top - l).collect();
    let profile = RecursionProfile {
        n,
        r,
        q,
        a,
        deviation,
    };
    assemble(
        rates,
        sigma,
        profile,
        gaps,
        Method::Equalization,
        iterations,
        false,
    )
}
