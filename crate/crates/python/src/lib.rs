//! Python module `turnpike`.
//!
//! Rates are plain lists of floats; reports come back as dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use turnpike_core::optimizer::{self, EqualizationOptions, DEFAULT_RECURSION_TOL};
use turnpike_core::verifier::{self, BoundsReport};
use turnpike_core::{rfm, spectral, Error, RateVector};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::NonPositiveRate { .. } | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rates(values: Vec<f64>) -> PyResult<RateVector> {
    RateVector::new(values).map_err(to_py)
}

/// Perron root, unit Perron vector and residual of `B(λ)`.
#[pyfunction]
#[pyo3(signature = (rates_, tol = spectral::DEFAULT_TOL))]
fn perron(rates_: Vec<f64>, tol: f64) -> PyResult<(f64, Vec<f64>, f64)> {
    let m = spectral::build_matrix(&rates(rates_)?);
    let p = spectral::perron(&m, tol).map_err(to_py)?;
    Ok((p.sigma, p.v, p.residual))
}

/// Closed-form Perron pair of `B(1_{n+1})`.
#[pyfunction]
fn toeplitz_oracle(n: usize) -> PyResult<(f64, Vec<f64>)> {
    let p = spectral::toeplitz_oracle(n).map_err(to_py)?;
    Ok((p.sigma, p.v))
}

/// `(R, e)` by the spectral route or by shooting.
#[pyfunction]
#[pyo3(signature = (rates_, method = "spectral", tol = spectral::DEFAULT_TOL))]
fn steady_state(rates_: Vec<f64>, method: &str, tol: f64) -> PyResult<(f64, Vec<f64>)> {
    let r = rates(rates_)?;
    let s = match method {
        "spectral" => rfm::steady_state_spectral(&r, tol),
        "shooting" => rfm::steady_state_shooting(&r, tol),
        _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
    }
    .map_err(to_py)?;
    Ok((s.production_rate, s.e))
}

/// `∂R/∂λ_i`.
#[pyfunction]
fn sensitivities(rates_: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(rfm::sensitivities(&rates(rates_)?).map_err(to_py)?.0)
}

#[pyfunction]
fn mu_values(rates_: Vec<f64>) -> PyResult<Vec<f64>> {
    rfm::mu_values(&rates(rates_)?).map_err(to_py)
}

/// Integrates the flow equations; returns a dict with `times`, `states`,
/// `converged_at` and the `step` actually used.
#[pyfunction]
#[pyo3(signature = (rates_, x0, t_final, step = rfm::DEFAULT_STEP, every = 1))]
fn simulate<'py>(
    py: Python<'py>,
    rates_: Vec<f64>,
    x0: Vec<f64>,
    t_final: f64,
    step: f64,
    every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let t = rfm::simulate_every(&rates(rates_)?, &x0, t_final, step, every).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", t.times)?;
    d.set_item("states", t.states)?;
    d.set_item("converged_at", t.converged_at)?;
    d.set_item("step", t.step)?;
    Ok(d)
}

/// An optimal rate vector and the quantities derived from it.
#[pyclass(frozen, name = "OptimalSolution", module = "turnpike")]
struct PySolution(optimizer::OptimalSolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }
    #[getter]
    fn method(&self) -> String {
        self.0.diagnostics.method.to_string()
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.0.diagnostics.iterations
    }
    #[getter]
    fn lam(&self) -> Vec<f64> {
        self.0.lambda().to_vec()
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn production_rate(&self) -> f64 {
        self.0.production_rate
    }
    #[getter]
    fn e(&self) -> Vec<f64> {
        self.0.steady.e.clone()
    }
    #[getter]
    fn v(&self) -> Vec<f64> {
        self.0.perron.v.clone()
    }
    #[getter]
    fn r(&self) -> f64 {
        self.0.profile.r
    }
    #[getter]
    fn q(&self) -> f64 {
        self.0.profile.q
    }
    #[getter]
    fn a(&self) -> Vec<f64> {
        self.0.profile.a.clone()
    }
    #[getter]
    fn s(&self) -> Vec<f64> {
        self.0.sensitivities.0.clone()
    }
    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mu.clone()
    }
    #[getter]
    fn gaps(&self) -> Vec<f64> {
        self.0.gaps.clone()
    }
    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.0.kkt_residual
    }
    #[getter]
    fn eigen_residual(&self) -> f64 {
        self.0.eigen_residual
    }

    fn __repr__(&self) -> String {
        format!(
            "OptimalSolution(n={}, sigma={}, method={})",
            self.0.n, self.0.sigma, self.0.diagnostics.method
        )
    }
}

/// Optimal rates for `n` by `"recursion"` or `"equalize"`.
#[pyfunction]
#[pyo3(signature = (n, method = "recursion", tol = None, max_iter = 10_000))]
fn solve(n: usize, method: &str, tol: Option<f64>, max_iter: usize) -> PyResult<PySolution> {
    let sol = match method {
        "recursion" => optimizer::solve_recursion(n, tol.unwrap_or(DEFAULT_RECURSION_TOL)),
        "equalize" => optimizer::solve_equalization_with(
            n,
            EqualizationOptions {
                tol: tol.unwrap_or(EqualizationOptions::default().tol),
                max_iter,
                ..EqualizationOptions::default()
            },
        ),
        _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
    }
    .map_err(to_py)?;
    Ok(PySolution(sol))
}

fn report_dict<'py>(py: Python<'py>, r: BoundsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("M", r.max_gap)?;
    d.set_item("all_passed", r.all_passed)?;
    d.set_item("turnpike_width", r.turnpike_width)?;
    let mut checks = Vec::with_capacity(r.checks.len());
    for c in r.checks {
        let cd = PyDict::new(py);
        cd.set_item("name", c.name)?;
        cd.set_item("lhs", c.lhs)?;
        cd.set_item("rhs", c.rhs)?;
        cd.set_item(
            "relation",
            match c.relation {
                verifier::Relation::Less => "less",
                verifier::Relation::Equal => "equal",
            },
        )?;
        cd.set_item("margin", c.margin)?;
        cd.set_item("passed", c.passed)?;
        cd.set_item("marginal", c.marginal)?;
        checks.push(cd);
    }
    d.set_item("checks", checks)?;
    Ok(d)
}

#[pyfunction]
fn check_theorem1<'py>(py: Python<'py>, sol: &PySolution) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, verifier::check_theorem1(&sol.0))
}

#[pyfunction]
fn check_structure<'py>(py: Python<'py>, sol: &PySolution) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, verifier::check_structure(&sol.0))
}

/// Every check plus turnpike widths for `eps`.
#[pyfunction]
#[pyo3(signature = (sol, eps = Vec::new()))]
fn verify<'py>(py: Python<'py>, sol: &PySolution, eps: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, verifier::verify(&sol.0, &eps))
}

#[pyfunction]
fn max_gap_metric(sol: &PySolution) -> f64 {
    verifier::max_gap_metric(&sol.0)
}

#[pyfunction]
fn turnpike_width(sol: &PySolution, eps: f64) -> usize {
    verifier::turnpike_width(&sol.0, eps)
}

/// `(λ, σ, R)` for the all-ones rates.
#[pyfunction]
fn baseline_ones(n: usize) -> PyResult<(Vec<f64>, f64, f64)> {
    let b = optimizer::baseline_ones(n).map_err(to_py)?;
    Ok((b.rates.into_vec(), b.sigma, b.production_rate))
}

/// `(λ, σ, R)` for the rates giving all densities 1/2 under the budget.
#[pyfunction]
fn baseline_tilde(n: usize) -> PyResult<(Vec<f64>, f64, f64)> {
    let b = optimizer::baseline_tilde(n).map_err(to_py)?;
    Ok((b.rates.into_vec(), b.sigma, b.production_rate))
}

/// `F_s(x, y) = (s x² − y, x)`.
#[pyfunction]
fn apply_f(s: f64, point: (f64, f64)) -> (f64, f64) {
    optimizer::apply_f(s, point)
}

/// Eigenvalues of the numeric Jacobian of `F_s` at `(2/s, 2/s)`.
#[pyfunction]
fn fixed_point_eigenvalues(s: f64) -> PyResult<(f64, f64)> {
    optimizer::fixed_point_eigenvalues(s).map_err(to_py)
}

/// The sequence `a_0 = 0, a_1 = 1, a_{i+1} = r a_i² − a_{i−1}`.
#[pyfunction]
#[pyo3(signature = (r, n, half_only = false))]
fn recursion_profile(r: f64, n: usize, half_only: bool) -> PyResult<Vec<f64>> {
    Ok(optimizer::recursion_profile(r, n, half_only)
        .map_err(to_py)?
        .a)
}

#[pymodule]
fn turnpike(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(perron, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivities, m)?)?;
    m.add_function(wrap_pyfunction!(mu_values, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem1, m)?)?;
    m.add_function(wrap_pyfunction!(check_structure, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(max_gap_metric, m)?)?;
    m.add_function(wrap_pyfunction!(turnpike_width, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_ones, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(apply_f, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(recursion_profile, m)?)?;
    Ok(())
}
