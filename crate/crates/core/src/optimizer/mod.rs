//! Minimization of the Perron root of `B(λ)` under `Σλ_i ≤ n + 1`.
//!
//! Two independent solvers produce an [`OptimalSolution`]:
//! [`solve_recursion`] shoots on the universal recursion and
//! [`solve_equalization`] drives all sensitivities `∂R/∂λ_i` to a common
//! value. [`baseline_ones`] and [`baseline_tilde`] give the two natural
//! non-optimal comparison points.

mod baseline;
mod equalization;
pub mod recursion;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rfm::{mu_from_pair, sensitivities_from_pair, steady_state_from_pair};
use crate::rfm::{SensitivityVector, SteadyState};
use crate::spectral::{build_matrix, perron, PerronPair, RateVector, DEFAULT_TOL};

pub use baseline::{baseline_ones, baseline_tilde, Baseline};
pub use equalization::{solve_equalization, solve_equalization_with, EqualizationOptions};
pub use recursion::{
    apply_f, eigenvalues_2x2, f_jacobian, fixed_point_eigenvalues, recursion_profile,
    shoot_residual, RecursionProfile,
};

/// Default bracket width for `r`.
pub const DEFAULT_RECURSION_TOL: f64 = 1e-12;

/// Relative agreement required between `(r³/λ_0)^{1/2}` and the Perron root.
pub const SIGMA_CONSISTENCY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Recursion,
    Equalization,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Recursion => "recursion",
            Method::Equalization => "equalization",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub method: Method,
    pub iterations: usize,
    /// The shooting bracket ends did not differ in sign and a grid scan was used.
    pub bracket_fallback: bool,
    /// Perron root of `B(λ̄)` from the eigensolver.
    pub sigma_spectral: f64,
}

/// An optimum `λ̄` with everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    pub n: usize,
    pub rates: RateVector,
    pub sigma: f64,
    pub production_rate: f64,
    pub steady: SteadyState,
    pub profile: RecursionProfile,
    pub perron: PerronPair,
    pub sensitivities: SensitivityVector,
    pub mu: Vec<f64>,
    /// `(max s − min s) / mean s`.
    pub kkt_residual: f64,
    pub eigen_residual: f64,
    /// `4/σ̄² − λ̄_i`.
    pub gaps: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl OptimalSolution {
    pub fn lambda(&self) -> &[f64] {
        self.rates.as_slice()
    }

    /// `σ̄ v̄_1² / λ̄_0`, the common value of all `μ̄_i`.
    pub fn mu_common(&self) -> f64 {
        self.sigma * self.perron.v[0] * self.perron.v[0] / self.rates[0]
    }
}

pub(crate) fn assemble(
    rates: RateVector,
    sigma: f64,
    profile: RecursionProfile,
    gaps: Vec<f64>,
    method: Method,
    iterations: usize,
    bracket_fallback: bool,
) -> Result<OptimalSolution> {
    let pair = perron(&build_matrix(&rates), DEFAULT_TOL)?;
    let steady = steady_state_from_pair(&rates, &pair)?;
    let sensitivities = sensitivities_from_pair(&rates, &pair);
    let mu = mu_from_pair(&rates, &pair);
    Ok(OptimalSolution {
        n: rates.n(),
        sigma,
        production_rate: sigma.powi(-2),
        steady,
        profile,
        kkt_residual: sensitivities.spread(),
        sensitivities,
        mu,
        eigen_residual: pair.residual,
        gaps,
        diagnostics: Diagnostics {
            method,
            iterations,
            bracket_fallback,
            sigma_spectral: pair.sigma,
        },
        perron: pair,
        rates,
    })
}

/// Solves the problem by shooting on `r` and reconstructing
/// `λ̄_i = c·ā_{i+1}ā_{i+2}` with `Σλ̄_i = n + 1`.
pub fn solve_recursion(n: usize, tol: f64) -> Result<OptimalSolution> {
    let (profile, iterations, fallback) = recursion::optimal_profile(n, tol)?;
    let a = &profile.a;
    let d = &profile.deviation;
    let q = profile.q;
    let products: Vec<f64> = (0..=n).map(|i| a[i + 1] * a[i + 2]).collect();
    let c = (n + 1) as f64 / products.iter().sum::<f64>();
    let rates = RateVector::new(products.iter().map(|p| c * p).collect())?;
    let sigma = (profile.r.powi(3) / rates[0]).sqrt();
    // 4/σ̄² − λ̄_i = c (q² − a_{i+1}a_{i+2}), expanded in deviations
    let gaps = (0..=n)
        .map(|i| {
            let (x, y) = (d[i + 1], d[i + 2]);
            c * (q * (x + y) - x * y)
        })
        .collect();
    let sol = assemble(
        rates,
        sigma,
        profile,
        gaps,
        Method::Recursion,
        iterations,
        fallback,
    )?;
    let spectral = sol.diagnostics.sigma_spectral;
    if ((sol.sigma - spectral) / spectral).abs() > SIGMA_CONSISTENCY {
        return Err(Error::Numerical(format!(
            "recursion root {} disagrees with the Perron root {} of the reconstructed rates",
            sol.sigma, spectral
        )));
    }
    Ok(sol)
}
