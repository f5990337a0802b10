use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use turnpike_core::optimizer::{
    solve_equalization, solve_recursion, OptimalSolution, DEFAULT_RECURSION_TOL,
};
use turnpike_core::ratesfile::{read_rates, read_values};
use turnpike_core::rfm::{simulate_every, steady_state_shooting, steady_state_spectral};
use turnpike_core::spectral::{build_matrix, perron, RateVector, DEFAULT_TOL};
use turnpike_core::verifier::{max_gap_metric, turnpike_width, verify, Check};

use crate::report::{Cell, Fields, Report, Results, Table};
use crate::{CliError, Command, MethodArg, Range, Solver, Source};

const EQUALIZE_TOL: f64 = 1e-10;
const EQUALIZE_MAX_ITER: usize = 10_000;
/// Largest per-entry disagreement accepted between the two solvers.
const CROSS_TOL: f64 = 1e-6;

type Verdict = Result<(), CliError>;

pub fn run(command: &Command) -> Result<(Report, Verdict), CliError> {
    let config = serde_json::to_value(command)?;
    let (results, residuals, verdict) = match command {
        Command::Perron { source, solver, .. } => with_ok(perron_cmd(source, solver)?),
        Command::SteadyState { source, solver, .. } => with_ok(steady_state_cmd(source, solver)?),
        Command::Simulate {
            source,
            solver,
            t_final,
            step,
            x0,
            stride,
            ..
        } => with_ok(simulate_cmd(source, solver, *t_final, *step, x0, *stride)?),
        Command::Optimize { n, solver, .. } => with_ok(optimize_cmd(*n, solver)?),
        Command::Verify {
            range, solver, eps, ..
        } => verify_cmd(range, solver, eps)?,
        Command::Sweep {
            range, solver, eps, ..
        } => with_ok(sweep_cmd(range, solver, eps)?),
    };
    let report = Report {
        config,
        results,
        residuals,
    };
    Ok((report, verdict))
}

fn with_ok((r, m): (Results, Map<String, Value>)) -> (Results, Map<String, Value>, Verdict) {
    (r, m, Ok(()))
}

struct Solved {
    sol: OptimalSolution,
    /// Equalization result when both solvers were requested.
    check: Option<OptimalSolution>,
}

impl Solved {
    fn cross_gap(&self) -> Option<f64> {
        self.check.as_ref().map(|b| {
            self.sol
                .lambda()
                .iter()
                .zip(b.lambda())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
    }
}

fn solve(n: usize, solver: &Solver) -> Result<Solved, CliError> {
    if n < 1 {
        return Err(CliError::Usage("n must be at least 1".to_string()));
    }
    let recursion = |tol: Option<f64>| solve_recursion(n, tol.unwrap_or(DEFAULT_RECURSION_TOL));
    let equalize =
        |tol: Option<f64>| solve_equalization(n, tol.unwrap_or(EQUALIZE_TOL), EQUALIZE_MAX_ITER);
    let solved = match solver.method {
        MethodArg::Recursion => Solved {
            sol: recursion(solver.tol)?,
            check: None,
        },
        MethodArg::Equalize => Solved {
            sol: equalize(solver.tol)?,
            check: None,
        },
        MethodArg::Both => Solved {
            sol: recursion(solver.tol)?,
            check: Some(equalize(None)?),
        },
    };
    Ok(solved)
}

fn rates_of(source: &Source, solver: &Solver) -> Result<RateVector, CliError> {
    match (&source.rates, source.n) {
        (Some(path), _) => Ok(read_rates(path)?),
        (None, Some(n)) if source.optimal => Ok(solve(n, solver)?.sol.rates),
        (None, Some(n)) => Ok(RateVector::ones(n)?),
        (None, None) => Err(CliError::Usage("give --n or --rates".to_string())),
    }
}

fn spectral_tol(solver: &Solver) -> f64 {
    solver.tol.unwrap_or(DEFAULT_TOL)
}

fn perron_cmd(source: &Source, solver: &Solver) -> Result<(Results, Map<String, Value>), CliError> {
    let rates = rates_of(source, solver)?;
    let matrix = build_matrix(&rates);
    let pair = perron(&matrix, spectral_tol(solver))?;
    let mut f = Fields::default();
    f.scalar("n", rates.n())
        .scalar("sigma", pair.sigma)
        .vector("v", &pair.v)
        .vector("lambda", rates.as_slice());
    let mut res = Map::new();
    res.insert("eigen_residual".into(), json!(pair.residual));
    res.insert(
        "spectral_gap".into(),
        json!(pair.sigma - matrix.second_eigenvalue()),
    );
    Ok((Results::Fields(f), res))
}

fn steady_state_cmd(
    source: &Source,
    solver: &Solver,
) -> Result<(Results, Map<String, Value>), CliError> {
    let rates = rates_of(source, solver)?;
    let tol = spectral_tol(solver);
    let ss = steady_state_spectral(&rates, tol)?;
    let shot = steady_state_shooting(&rates, tol)?;
    let sigma = ss.production_rate.powf(-0.5);
    let mut f = Fields::default();
    f.scalar("n", rates.n())
        .scalar("R", ss.production_rate)
        .scalar("sigma", sigma)
        .vector("e", &ss.e);
    let de =
        ss.e.iter()
            .zip(&shot.e)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    let mut res = Map::new();
    res.insert("flow_residual".into(), json!(ss.flow_residual(&rates)));
    res.insert(
        "shooting_R_gap".into(),
        json!((ss.production_rate - shot.production_rate).abs()),
    );
    res.insert("shooting_e_gap".into(), json!(de));
    Ok((Results::Fields(f), res))
}

fn initial_state(arg: &str, n: usize) -> Result<Vec<f64>, CliError> {
    match arg {
        "zeros" => Ok(vec![0.0; n]),
        "half" => Ok(vec![0.5; n]),
        _ => {
            if let Some(seed) = arg.strip_prefix("random:") {
                let seed: u64 = seed
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad seed in --x0 {arg:?}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..n).map(|_| rng.random_range(0.0..=1.0)).collect())
            } else {
                Ok(read_values(arg)?)
            }
        }
    }
}

fn simulate_cmd(
    source: &Source,
    solver: &Solver,
    t_final: f64,
    step: f64,
    x0: &str,
    stride: usize,
) -> Result<(Results, Map<String, Value>), CliError> {
    let rates = rates_of(source, solver)?;
    let n = rates.n();
    let start = initial_state(x0, n)?;
    let traj = simulate_every(&rates, &start, t_final, step, stride)?;
    let ss = steady_state_spectral(&rates, DEFAULT_TOL)?;
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=n).map(|i| format!("x_{i}")));
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| {
            std::iter::once(Cell::from(*t))
                .chain(x.iter().map(|v| Cell::from(*v)))
                .collect()
        })
        .collect();
    let dist = traj
        .final_state()
        .iter()
        .zip(&ss.e)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut res = Map::new();
    res.insert("step".into(), json!(traj.step));
    res.insert("converged_at".into(), json!(traj.converged_at));
    res.insert("final_distance_to_steady_state".into(), json!(dist));
    Ok((Results::Table(Table { columns, rows }), res))
}

fn optimize_cmd(n: usize, solver: &Solver) -> Result<(Results, Map<String, Value>), CliError> {
    let solved = solve(n, solver)?;
    let s = &solved.sol;
    let mut f = Fields::default();
    f.scalar("n", n)
        .scalar("sigma", s.sigma)
        .scalar("R", s.production_rate)
        .scalar("r", s.profile.r)
        .scalar("q", s.profile.q)
        .scalar("M", max_gap_metric(s))
        .vector("lambda", s.lambda())
        .vector("e", &s.steady.e)
        .vector("a", &s.profile.a)
        .vector("s", s.sensitivities.as_slice())
        .vector("mu", &s.mu)
        .vector("gap", &s.gaps)
        .vector("v", &s.perron.v);
    let mut res = Map::new();
    res.insert("method".into(), json!(s.diagnostics.method));
    res.insert("iterations".into(), json!(s.diagnostics.iterations));
    res.insert("kkt_residual".into(), json!(s.kkt_residual));
    res.insert("eigen_residual".into(), json!(s.eigen_residual));
    res.insert(
        "flow_residual".into(),
        json!(s.steady.flow_residual(&s.rates)),
    );
    res.insert(
        "sigma_spectral_gap".into(),
        json!((s.sigma - s.diagnostics.sigma_spectral).abs()),
    );
    if let Some(b) = &solved.check {
        let gap: Vec<f64> = s
            .lambda()
            .iter()
            .zip(b.lambda())
            .map(|(x, y)| (x - y).abs())
            .collect();
        f.vector("equalize_lambda", b.lambda())
            .scalar("equalize_sigma", b.sigma)
            .vector("cross_gap", &gap);
        res.insert(
            "equalize_iterations".into(),
            json!(b.diagnostics.iterations),
        );
        res.insert("equalize_kkt_residual".into(), json!(b.kkt_residual));
        res.insert("max_cross_gap".into(), json!(solved.cross_gap()));
        if solved.cross_gap().is_some_and(|g| g > CROSS_TOL) {
            return Err(CliError::Numerical(format!(
                "solvers disagree by {:e} (tolerance {CROSS_TOL:e})",
                solved.cross_gap().unwrap_or(f64::NAN)
            )));
        }
    }
    Ok((Results::Fields(f), res))
}

fn n_values(range: &Range) -> Result<Vec<usize>, CliError> {
    let (lo, hi) = match (range.n, range.n_min, range.n_max) {
        (Some(n), _, _) => (n, n),
        (None, Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CliError::Usage(
                "give --n or both --n-min and --n-max".to_string(),
            ))
        }
    };
    if lo < 1 {
        return Err(CliError::Usage("n must be at least 1".to_string()));
    }
    if lo > hi {
        return Err(CliError::Usage(format!(
            "empty range: n-min {lo} > n-max {hi}"
        )));
    }
    Ok((lo..=hi).collect())
}

fn check_eps(eps: &[f64]) -> Result<(), CliError> {
    match eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        Some(e) => Err(CliError::Usage(format!(
            "eps values must be positive, got {e}"
        ))),
        None => Ok(()),
    }
}

fn width_columns(eps: &[f64]) -> Vec<String> {
    eps.iter().map(|e| format!("width_{e}")).collect()
}

fn solve_all(ns: &[usize], solver: &Solver) -> Result<Vec<Solved>, CliError> {
    ns.par_iter().map(|&n| solve(n, solver)).collect()
}

fn verify_cmd(
    range: &Range,
    solver: &Solver,
    eps: &[f64],
) -> Result<(Results, Map<String, Value>, Verdict), CliError> {
    let ns = n_values(range)?;
    check_eps(eps)?;
    let solved = solve_all(&ns, solver)?;
    let reports: Vec<_> = solved
        .par_iter()
        .map(|s| {
            let mut report = verify(&s.sol, eps);
            if let Some(g) = s.cross_gap() {
                report
                    .checks
                    .push(Check::less("cross_solver", g, CROSS_TOL));
                report.all_passed = report.checks.iter().all(|c| c.passed);
            }
            report
        })
        .collect();

    let mut columns: Vec<String> = ["n", "sigma", "r", "q", "M", "all_passed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    columns.extend(width_columns(eps));
    let mut rows = Vec::with_capacity(ns.len());
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut marginal = 0;
    let mut max_kkt: f64 = 0.0;
    let mut kinds: std::collections::BTreeMap<String, usize> = Default::default();
    for (s, report) in solved.iter().zip(&reports) {
        let sol = &s.sol;
        let mut row = vec![
            Cell::from(sol.n),
            Cell::from(sol.sigma),
            Cell::from(sol.profile.r),
            Cell::from(sol.profile.q),
            Cell::from(report.max_gap),
            Cell::from(report.all_passed),
        ];
        row.extend(report.turnpike_width.iter().map(|(_, w)| Cell::from(*w)));
        rows.push(row);
        checks += report.checks.len();
        for c in &report.checks {
            let kind = c.name.split('[').next().unwrap_or(&c.name);
            *kinds.entry(kind.to_string()).or_default() += 1;
        }
        marginal += report.marginal().count();
        max_kkt = max_kkt.max(sol.kkt_residual);
        failures.extend(report.failures().map(|c| {
            json!({"n": sol.n, "check": c.name, "lhs": c.lhs, "rhs": c.rhs, "margin": c.margin})
        }));
    }
    let mut res = Map::new();
    res.insert("checks".into(), json!(checks));
    res.insert("checks_by_kind".into(), json!(kinds));
    res.insert("marginal".into(), json!(marginal));
    res.insert("max_kkt_residual".into(), json!(max_kkt));
    let verdict = if failures.is_empty() {
        Ok(())
    } else {
        let first = &failures[0];
        Err(CliError::Verification(format!(
            "{} checks failed, first: n={} {}",
            failures.len(),
            first["n"],
            first["check"]
        )))
    };
    res.insert("failures".into(), Value::Array(failures));
    Ok((Results::Table(Table { columns, rows }), res, verdict))
}

fn sweep_cmd(
    range: &Range,
    solver: &Solver,
    eps: &[f64],
) -> Result<(Results, Map<String, Value>), CliError> {
    let ns = n_values(range)?;
    check_eps(eps)?;
    let solved = solve_all(&ns, solver)?;
    let mut columns: Vec<String> = ["n", "sigma", "R", "r", "q", "M", "kkt_residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    columns.extend(width_columns(eps));
    let with_cross = solver.method == MethodArg::Both;
    if with_cross {
        columns.push("cross_gap".to_string());
    }
    let rows = solved
        .iter()
        .map(|s| {
            let sol = &s.sol;
            let mut row = vec![
                Cell::from(sol.n),
                Cell::from(sol.sigma),
                Cell::from(sol.production_rate),
                Cell::from(sol.profile.r),
                Cell::from(sol.profile.q),
                Cell::from(max_gap_metric(sol)),
                Cell::from(sol.kkt_residual),
            ];
            row.extend(eps.iter().map(|&e| Cell::from(turnpike_width(sol, e))));
            if with_cross {
                row.push(Cell::from(s.cross_gap()));
            }
            row
        })
        .collect();
    let mut res = Map::new();
    let max_kkt = solved
        .iter()
        .map(|s| s.sol.kkt_residual)
        .fold(0.0, f64::max);
    res.insert("max_kkt_residual".into(), json!(max_kkt));
    Ok((Results::Table(Table { columns, rows }), res))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(n: Option<usize>, lo: Option<usize>, hi: Option<usize>) -> Range {
        Range {
            n,
            n_min: lo,
            n_max: hi,
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(n_values(&range(Some(4), None, None)).unwrap(), vec![4]);
        assert_eq!(
            n_values(&range(None, Some(2), Some(4))).unwrap(),
            vec![2, 3, 4]
        );
        assert!(matches!(
            n_values(&range(None, Some(5), Some(4))),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            n_values(&range(Some(0), None, None)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn initial_states() {
        assert_eq!(initial_state("zeros", 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(initial_state("half", 1).unwrap(), vec![0.5]);
        let a = initial_state("random:5", 6).unwrap();
        assert_eq!(a, initial_state("random:5", 6).unwrap());
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(matches!(
            initial_state("random:x", 2),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn both_methods_agree() {
        let s = solve(
            9,
            &Solver {
                method: MethodArg::Both,
                tol: None,
            },
        )
        .unwrap();
        assert!(s.cross_gap().unwrap() < CROSS_TOL);
    }
}
