//! Ribosome flow model: steady states, production rate, sensitivities and
//! time integration.
//!
//! The chain has `n` sites with densities `x_1..x_n` and boundary values
//! `x_0 ≡ 1`, `x_{n+1} ≡ 0`. Site `i` feeds site `i+1` at rate
//! `λ_i x_i (1 − x_{i+1})`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{build_matrix, perron, PerronPair, RateVector};

/// Equilibrium densities `e_1..e_n` and production rate `R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub e: Vec<f64>,
    pub production_rate: f64,
}

impl SteadyState {
    /// `max_i |λ_i e_i (1 − e_{i+1}) − R|` with `e_0 = 1`, `e_{n+1} = 0`.
    pub fn flow_residual(&self, rates: &RateVector) -> f64 {
        let n = self.e.len();
        let at = |i: usize| match i {
            0 => 1.0,
            i if i == n + 1 => 0.0,
            i => self.e[i - 1],
        };
        (0..=n)
            .map(|i| (rates[i] * at(i) * (1.0 - at(i + 1)) - self.production_rate).abs())
            .fold(0.0, f64::max)
    }
}

/// `s_i = ∂R/∂λ_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SensitivityVector(pub Vec<f64>);

impl SensitivityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `(max s − min s) / mean s`; zero exactly when all sensitivities agree.
    pub fn spread(&self) -> f64 {
        let s = &self.0;
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        (max - min) / mean
    }
}

/// Sampled solution of the RFM equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// First time at which `‖ẋ‖_∞ < 1e-10`, if reached.
    pub converged_at: Option<f64>,
    /// Step actually used after any halving.
    pub step: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
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

/// Steady state from an already computed Perron pair of `B(λ)`.
pub fn steady_state_from_pair(rates: &RateVector, pair: &PerronPair) -> Result<SteadyState> {
    let n = rates.n();
    let sigma = pair.sigma;
    let v = &pair.v;
    let e: Vec<f64> = (1..=n)
        .map(|i| v[i + 1] / (rates[i].sqrt() * sigma * v[i]))
        .collect();
    if let Some(i) = e.iter().position(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Numerical(format!(
            "spectral density e_{} = {} lies outside (0, 1)",
            i + 1,
            e[i]
        )));
    }
    Ok(SteadyState {
        e,
        production_rate: sigma.powi(-2),
    })
}

/// Steady state via `R = σ^{-2}` and `e_i = v_{i+2} / (√λ_i σ v_{i+1})`.
pub fn steady_state_spectral(rates: &RateVector, tol: f64) -> Result<SteadyState> {
    let pair = perron(&build_matrix(rates), tol)?;
    steady_state_from_pair(rates, &pair)
}

/// Runs `e_0 = 1, e_{i+1} = 1 − R/(λ_i e_i)` and returns `e_1..e_{n+1}`, or
/// `None` when some `e_i` with `i ≤ n` is not positive.
fn forward_densities(rates: &[f64], production_rate: f64) -> Option<Vec<f64>> {
    let mut e = Vec::with_capacity(rates.len());
    let mut prev = 1.0;
    for (i, &l) in rates.iter().enumerate() {
        let next = 1.0 - production_rate / (l * prev);
        if i + 1 < rates.len() && next <= 0.0 {
            return None;
        }
        e.push(next);
        prev = next;
    }
    Some(e)
}

/// Densities at a known `R`: the forward recursion from `e_0 = 1` and the
/// backward recursion `e_i = R/(λ_i(1 − e_{i+1}))` from `e_{n+1} = 0`, joined
/// at the index where the one flow equation neither of them enforces is
/// best satisfied.
///
/// Each recursion amplifies errors wherever the other one damps them, so
/// neither alone is accurate on chains with strongly varying rates.
fn twisted_densities(lam: &[f64], r: f64) -> Vec<f64> {
    let n = lam.len() - 1;
    // index 0..=n+1, NaN once a recursion leaves (0, 1)
    let mut fwd = vec![f64::NAN; n + 2];
    fwd[0] = 1.0;
    for i in 0..n {
        let next = 1.0 - r / (lam[i] * fwd[i]);
        if !(next > 0.0 && next < 1.0) {
            break;
        }
        fwd[i + 1] = next;
    }
    let mut bwd = vec![f64::NAN; n + 2];
    bwd[n + 1] = 0.0;
    for i in (1..=n).rev() {
        let prev = r / (lam[i] * (1.0 - bwd[i + 1]));
        if !(prev > 0.0 && prev < 1.0) {
            break;
        }
        bwd[i] = prev;
    }
    let twist = (0..=n)
        .filter(|&k| fwd[k].is_finite() && bwd[k + 1].is_finite())
        .min_by(|&a, &b| {
            let gap = |k: usize| (lam[k] * fwd[k] * (1.0 - bwd[k + 1]) - r).abs();
            gap(a).total_cmp(&gap(b))
        })
        .unwrap_or(n);
    (1..=n)
        .map(|i| if i <= twist { fwd[i] } else { bwd[i] })
        .collect()
}

/// Steady state by bisection on `R` in `(0, min λ)` so that the forward
/// density recursion ends with `e_{n+1} = 0`. Densities are then rebuilt
/// at that `R` from both ends of the chain.
///
/// Independent of the eigensolver; used as a cross-check of
/// [`steady_state_spectral`].
pub fn steady_state_shooting(rates: &RateVector, tol: f64) -> Result<SteadyState> {
    check_tol(tol)?;
    const EPS: f64 = 1e-12;
    let lam = rates.as_slice();
    let min = rates.min();
    // e_{n+1}(R) decreases in R; `None` means R overshot
    let terminal = |r: f64| forward_densities(lam, r).map(|e| e[e.len() - 1]);

    let mut lo = EPS * min;
    let mut hi = (1.0 - EPS) * min;
    if !terminal(lo).is_some_and(|t| t > 0.0) {
        return Err(Error::Bracket {
            what: "density shooting",
            lo,
            hi,
        });
    }
    if terminal(hi).is_some_and(|t| t > 0.0) {
        return Err(Error::Bracket {
            what: "density shooting",
            lo,
            hi,
        });
    }
    let mut iterations = 0;
    let mut collapsed = false;
    while iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            collapsed = true;
            break;
        }
        if terminal(mid).is_some_and(|t| t > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (production_rate, end) = [lo, hi]
        .into_iter()
        .filter_map(|r| terminal(r).map(|t| (r, t)))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or_else(|| Error::Numerical("density shooting lost its lower bracket".to_string()))?;
    // once R is resolved to adjacent floats the terminal value cannot improve
    if end.abs() > tol && !collapsed {
        return Err(Error::NoConvergence {
            what: "density shooting",
            iterations,
            residual: end,
        });
    }
    let e = twisted_densities(lam, production_rate);
    if let Some(i) = e.iter().position(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Numerical(format!(
            "shooting density e_{} = {} lies outside (0, 1)",
            i + 1,
            e[i]
        )));
    }
    Ok(SteadyState { e, production_rate })
}

/// `s_i = 2 R^{3/2} v_{i+1} v_{i+2} / λ_i^{3/2}` from a Perron pair.
pub fn sensitivities_from_pair(rates: &RateVector, pair: &PerronPair) -> SensitivityVector {
    let r32 = pair.sigma.powi(-3);
    SensitivityVector(
        mu_from_pair(rates, pair)
            .into_iter()
            .map(|mu| 2.0 * r32 * mu)
            .collect(),
    )
}

/// Gradient of the production rate with respect to each rate.
pub fn sensitivities(rates: &RateVector) -> Result<SensitivityVector> {
    let pair = perron(&build_matrix(rates), crate::spectral::DEFAULT_TOL)?;
    Ok(sensitivities_from_pair(rates, &pair))
}

/// `μ_i = v_{i+1} v_{i+2} λ_i^{-3/2}` from a Perron pair.
pub fn mu_from_pair(rates: &RateVector, pair: &PerronPair) -> Vec<f64> {
    rates
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, l)| pair.v[i] * pair.v[i + 1] * l.powf(-1.5))
        .collect()
}

pub fn mu_values(rates: &RateVector) -> Result<Vec<f64>> {
    let pair = perron(&build_matrix(rates), crate::spectral::DEFAULT_TOL)?;
    Ok(mu_from_pair(rates, &pair))
}

/// Default integration step.
pub const DEFAULT_STEP: f64 = 0.01;
const CUBE_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 8;
const STILL: f64 = 1e-10;

fn rfm_rhs(lam: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let at = |i: usize| match i {
        0 => 1.0,
        i if i == n + 1 => 0.0,
        i => x[i - 1],
    };
    let mut inflow = lam[0] * (1.0 - at(1));
    for i in 1..=n {
        let outflow = lam[i] * at(i) * (1.0 - at(i + 1));
        out[i - 1] = inflow - outflow;
        inflow = outflow;
    }
}

fn rk4_step(lam: &[f64], x: &mut [f64], h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64]) {
    let n = x.len();
    rfm_rhs(lam, x, &mut k[0]);
    for j in 0..n {
        tmp[j] = x[j] + 0.5 * h * k[0][j];
    }
    rfm_rhs(lam, tmp, &mut k[1]);
    for j in 0..n {
        tmp[j] = x[j] + 0.5 * h * k[1][j];
    }
    rfm_rhs(lam, tmp, &mut k[2]);
    for j in 0..n {
        tmp[j] = x[j] + h * k[2][j];
    }
    rfm_rhs(lam, tmp, &mut k[3]);
    for j in 0..n {
        x[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
    }
}

enum Attempt {
    Done(Trajectory),
    LeftCube { time: f64, excursion: f64 },
}

fn integrate(lam: &[f64], x0: &[f64], t_final: f64, step: f64, every: usize) -> Attempt {
    let n = x0.len();
    let steps = (t_final / step).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let mut x = x0.to_vec();
    let mut prev = x.clone();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut converged_at = None;
    for s in 1..=steps {
        prev.copy_from_slice(&x);
        rk4_step(lam, &mut x, h, &mut k, &mut tmp);
        let t = if s == steps { t_final } else { s as f64 * h };
        let excursion = x
            .iter()
            .map(|&xi| (-xi).max(xi - 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        if excursion > CUBE_TOL || x.iter().any(|xi| !xi.is_finite()) {
            return Attempt::LeftCube { time: t, excursion };
        }
        for xi in x.iter_mut() {
            *xi = xi.clamp(0.0, 1.0);
        }
        if converged_at.is_none() {
            let change = x
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < STILL * h {
                converged_at = Some(t);
            }
        }
        if s % every == 0 || s == steps {
            times.push(t);
            states.push(x.clone());
        }
    }
    Attempt::Done(Trajectory {
        times,
        states,
        converged_at,
        step: h,
    })
}

/// Integrates the RFM from `x0` to `t_final` with classical RK4, recording
/// every `every`-th step (the final state is always recorded).
///
/// If a state leaves `[0, 1]^n` by more than `1e-9` the run restarts with
/// half the step, up to eight times.
pub fn simulate_every(
    rates: &RateVector,
    x0: &[f64],
    t_final: f64,
    step: f64,
    every: usize,
) -> Result<Trajectory> {
    let n = rates.n();
    if x0.len() != n {
        return Err(Error::domain(format!(
            "initial state has {} entries, expected {n}",
            x0.len()
        )));
    }
    if let Some(i) = x0.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain(format!(
            "initial density x_{} = {} is outside [0, 1]",
            i + 1,
            x0[i]
        )));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::domain(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    if every == 0 {
        return Err(Error::domain("sampling interval must be at least 1"));
    }
    let mut h = step.min(t_final);
    let mut last = (0.0, 0.0);
    for _ in 0..=MAX_HALVINGS {
        match integrate(rates.as_slice(), x0, t_final, h, every) {
            Attempt::Done(traj) => return Ok(traj),
            Attempt::LeftCube { time, excursion } => {
                last = (time, excursion);
                h *= 0.5;
            }
        }
    }
    Err(Error::StepSize {
        time: last.0,
        step: h * 2.0,
        excursion: last.1,
    })
}

/// [`simulate_every`] recording every step.
pub fn simulate(rates: &RateVector, x0: &[f64], t_final: f64, step: f64) -> Result<Trajectory> {
    simulate_every(rates, x0, t_final, step, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rv(x: &[f64]) -> RateVector {
        RateVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn n1_steady_state_both_routes() {
        let r = rv(&[1.0, 1.0]);
        for ss in [
            steady_state_spectral(&r, 1e-12).unwrap(),
            steady_state_shooting(&r, 1e-12).unwrap(),
        ] {
            assert_relative_eq!(ss.production_rate, 0.5, epsilon = 1e-12);
            assert_relative_eq!(ss.e[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn n1_density_formula() {
        // e_1 = λ_0/(λ_0+λ_1)
        let r = rv(&[2.0, 0.5]);
        let ss = steady_state_spectral(&r, 1e-12).unwrap();
        assert_relative_eq!(ss.e[0], 0.8, epsilon = 1e-12);
        assert!(ss.flow_residual(&r) < 1e-12);
    }

    #[test]
    fn ones_101_production_rate() {
        let r = RateVector::ones(100).unwrap();
        let a = steady_state_spectral(&r, 1e-12).unwrap();
        let b = steady_state_shooting(&r, 1e-12).unwrap();
        assert!((a.production_rate - 0.2502).abs() < 5e-4);
        assert_relative_eq!(a.production_rate, b.production_rate, epsilon = 1e-10);
    }

    #[test]
    fn sensitivities_on_ones_are_not_equal() {
        let s = sensitivities(&RateVector::ones(6).unwrap()).unwrap();
        assert!(s.as_slice()[0] < s.as_slice()[1]);
        assert!(s.spread() > 1e-3);
    }

    #[test]
    fn mu_and_s_share_argmax() {
        let r = rv(&[0.3, 2.0, 1.1, 0.7, 1.9]);
        let s = sensitivities(&r).unwrap();
        let mu = mu_values(&r).unwrap();
        let argmax = |x: &[f64]| {
            x.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(s.as_slice()), argmax(&mu));
    }

    #[test]
    fn n1_simulation_reaches_half() {
        let r = rv(&[1.0, 1.0]);
        let t = simulate_every(&r, &[0.0], 50.0, DEFAULT_STEP, 100).unwrap();
        assert!((t.final_state()[0] - 0.5).abs() < 1e-6);
        assert_eq!(*t.times.last().unwrap(), 50.0);
        assert_eq!(t.times.len(), t.states.len());
    }

    #[test]
    fn equilibrium_is_invariant() {
        let r = rv(&[0.9, 1.4, 0.6, 1.2]);
        let ss = steady_state_spectral(&r, 1e-12).unwrap();
        let t = simulate_every(&r, &ss.e, 20.0, DEFAULT_STEP, 500).unwrap();
        for (a, b) in t.final_state().iter().zip(&ss.e) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(t.converged_at, Some(DEFAULT_STEP));
    }

    #[test]
    fn simulate_rejects_bad_input() {
        let r = rv(&[1.0, 1.0, 1.0]);
        assert!(simulate(&r, &[0.5], 1.0, 0.01).is_err());
        assert!(simulate(&r, &[0.5, 1.2], 1.0, 0.01).is_err());
        assert!(simulate(&r, &[0.5, 0.5], -1.0, 0.01).is_err());
        assert!(simulate_every(&r, &[0.5, 0.5], 1.0, 0.01, 0).is_err());
    }

    #[test]
    fn huge_step_is_halved_or_reported() {
        let r = rv(&[50.0, 50.0, 50.0]);
        match simulate(&r, &[0.0, 1.0], 1.0, 0.5) {
            Ok(t) => {
                assert!(t.step < 0.5);
                assert!(t.states.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
            }
            Err(e) => assert!(matches!(e, Error::StepSize { .. })),
        }
    }
}
