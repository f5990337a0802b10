use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::RateVector;

/// A feasible, non-optimal rate vector with its closed-form Perron root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub rates: RateVector,
    pub sigma: f64,
    pub production_rate: f64,
}

/// Uniform rates `1_{n+1}`, `σ = 2cos(π/(n+3))`.
pub fn baseline_ones(n: usize) -> Result<Baseline> {
    let rates = RateVector::ones(n)?;
    let sigma = 2.0 * (std::f64::consts::PI / (n + 3) as f64).cos();
    Ok(Baseline {
        rates,
        sigma,
        production_rate: sigma.powi(-2),
    })
}

/// `λ̃ = ((n+1)/n)·(1/2, 1, …, 1, 1/2)` with `σ̃ = 2√(n/(n+1))`,
/// `R̃ = (n+1)/(4n)` and all steady-state densities equal to 1/2.
pub fn baseline_tilde(n: usize) -> Result<Baseline> {
    if n < 2 {
        return Err(Error::domain(format!(
            "the half-end baseline needs n >= 2, got {n}"
        )));
    }
    let c = (n + 1) as f64 / n as f64;
    let mut rates = vec![c; n + 1];
    rates[0] = 0.5 * c;
    rates[n] = 0.5 * c;
    let nf = n as f64;
    Ok(Baseline {
        rates: RateVector::new(rates)?,
        sigma: 2.0 * (nf / (nf + 1.0)).sqrt(),
        production_rate: (nf + 1.0) / (4.0 * nf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfm::steady_state_spectral;
    use crate::spectral::perron_of;
    use approx::assert_relative_eq;

    #[test]
    fn ones_closed_forms() {
        assert_relative_eq!(
            baseline_ones(1).unwrap().sigma,
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!((baseline_ones(2).unwrap().sigma - 1.6180).abs() < 5e-5);
        assert!((baseline_ones(100).unwrap().sigma - 1.9991).abs() < 5e-4);
    }

    #[test]
    fn tilde_matches_eigensolver() {
        assert_relative_eq!(
            baseline_tilde(3).unwrap().sigma,
            3f64.sqrt(),
            epsilon = 1e-15
        );
        for n in [2, 3, 10, 77] {
            let b = baseline_tilde(n).unwrap();
            assert_relative_eq!(b.rates.sum(), (n + 1) as f64, max_relative = 1e-14);
            let p = perron_of(&b.rates).unwrap();
            assert_relative_eq!(p.sigma, b.sigma, max_relative = 1e-10);
            let ss = steady_state_spectral(&b.rates, 1e-12).unwrap();
            assert_relative_eq!(ss.production_rate, b.production_rate, max_relative = 1e-10);
            for e in ss.e {
                assert!((e - 0.5).abs() < 1e-10);
            }
        }
        assert!(baseline_tilde(1).is_err());
    }
}
