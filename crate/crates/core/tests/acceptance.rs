//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turnpike_core::optimizer::{
    baseline_ones, fixed_point_eigenvalues, solve_equalization, solve_recursion,
    DEFAULT_RECURSION_TOL,
};
use turnpike_core::rfm::{sensitivities, simulate, steady_state_shooting, steady_state_spectral};
use turnpike_core::spectral::{perron_of, toeplitz_oracle, RateVector};
use turnpike_core::verifier::{check_gap_metric, check_theorem1, max_gap_metric, turnpike_width};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got}, want {want} (tol {tol:e})")
    })
}

fn random_rates(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> RateVector {
    RateVector::new((0..=n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn c1_golden_n1() -> Outcome {
    let a = solve_recursion(1, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
    let b = solve_equalization(1, 1e-10, 10_000).map_err(|e| e.to_string())?;
    for sol in [&a, &b] {
        let m = sol.diagnostics.method;
        for (i, l) in sol.lambda().iter().enumerate() {
            close(&format!("{m} lambda[{i}]"), *l, 1.0, 1e-9)?;
        }
        close(&format!("{m} sigma"), sol.sigma, 2f64.sqrt(), 1e-9)?;
        close(&format!("{m} R"), sol.production_rate, 0.5, 1e-9)?;
        close(&format!("{m} e_1"), sol.steady.e[0], 0.5, 1e-9)?;
    }
    Ok("lambda=(1,1) sigma=sqrt2 R=1/2 e=(1/2) for both solvers".into())
}

fn c2_golden_n2() -> Outcome {
    let sol = solve_recursion(2, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
    let r = sol.profile.r;
    close("r", r, 1.3247, 1e-4)?;
    close("r^3 - r - 1", r * r * r - r - 1.0, 0.0, 1e-12)?;
    Ok(format!("r={r:.12}"))
}

fn c3_golden_n3() -> Outcome {
    let sol = solve_recursion(3, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
    let lam = [0.8284, 1.1716, 1.1716, 0.8284];
    for (i, (x, y)) in sol.lambda().iter().zip(lam).enumerate() {
        close(&format!("lambda[{i}]"), *x, y, 5e-4)?;
    }
    close("sigma", sol.sigma, 1.7071, 5e-4)?;
    let v = [0.3218, 0.5000, 0.5412, 0.5000, 0.3218];
    for (i, (x, y)) in sol.perron.v.iter().zip(v).enumerate() {
        close(&format!("v[{i}]"), *x, y, 5e-4)?;
    }
    close("r", sol.profile.r, 1.3415, 5e-4)?;
    close("q", sol.profile.q, 1.4909, 5e-4)?;
    for (i, m) in sol.mu.iter().enumerate() {
        close(&format!("mu[{i}]"), *m, 0.2134, 5e-4)?;
    }
    close(
        "r closed form",
        sol.profile.r,
        (1.0 + 2f64.sqrt()).cbrt(),
        1e-9,
    )?;
    Ok(format!("sigma={:.6} r={:.12}", sol.sigma, sol.profile.r))
}

fn c4_golden_n20() -> Outcome {
    let sol = solve_recursion(20, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
    close("sigma", sol.sigma, 1.9473, 5e-4)?;
    close("r", sol.profile.r, 1.3476, 5e-4)?;
    close("q", sol.profile.q, 1.4842, 5e-4)?;
    close("mu[0]", sol.mu[0], 0.0464, 5e-4)?;
    let head = [
        0.6453, 0.9338, 1.0216, 1.0459, 1.0525, 1.0542, 1.0547, 1.0548,
    ];
    let mut table: Vec<f64> = head.to_vec();
    table.extend([1.0549; 5]);
    table.extend(head.iter().rev());
    ensure(sol.lambda().len() == 21, || "expected 21 rates".into())?;
    for (i, (x, y)) in sol.lambda().iter().zip(&table).enumerate() {
        close(&format!("lambda[{i}]"), *x, *y, 5e-4)?;
    }
    Ok(format!("sigma={:.6} mu0={:.6}", sol.sigma, sol.mu[0]))
}

fn c5_golden_n100() -> Outcome {
    let sol = solve_recursion(100, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
    close("sigma", sol.sigma, 1.9892, 5e-4)?;
    close("R", sol.production_rate, 0.2527, 5e-4)?;
    let base = baseline_ones(100).map_err(|e| e.to_string())?;
    close("baseline sigma", base.sigma, 1.9991, 5e-4)?;
    close("baseline R", base.production_rate, 0.2502, 5e-4)?;
    Ok(format!(
        "sigma={:.6} R={:.6} baseline sigma={:.6} R={:.6}",
        sol.sigma, sol.production_rate, base.sigma, base.production_rate
    ))
}

fn c6_gap_metric() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=100 {
        let sol = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        let m = max_gap_metric(&sol);
        worst = worst.max(m);
        let mut report = check_gap_metric(&sol);
        if n >= 36 {
            let t1 = check_theorem1(&sol);
            let decay = t1
                .checks
                .into_iter()
                .filter(|c| c.name.starts_with("gap_decay"));
            report.checks.extend(decay);
        }
        if let Some(c) = report.checks.iter().find(|c| !c.passed) {
            return Err(format!("n={n}: {} lhs={} rhs={}", c.name, c.lhs, c.rhs));
        }
    }
    Ok(format!("max M(n) over n=2..100 is {worst:.6}"))
}

fn c7_theorem1() -> Outcome {
    let mut count = 0;
    let mut marginal = 0;
    for n in 2..=200 {
        let sol = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        let report = check_theorem1(&sol);
        if let Some(c) = report.failures().next() {
            return Err(format!(
                "n={n}: {} lhs={} rhs={} margin={:e}",
                c.name, c.lhs, c.rhs, c.margin
            ));
        }
        count += report.checks.len();
        marginal += report.marginal().count();
    }
    Ok(format!(
        "{count} inequalities hold for n=2..200 ({marginal} with |margin| below the slack)"
    ))
}

fn c8_toeplitz() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=1000 {
        let p = perron_of(&RateVector::ones(n).unwrap()).map_err(|e| e.to_string())?;
        let o = toeplitz_oracle(n).map_err(|e| e.to_string())?;
        let d = (p.sigma - o.sigma).abs();
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("n={n}: {} vs {}", p.sigma, o.sigma))?;
    }
    Ok(format!("max |dsigma| = {worst:.2e}"))
}

fn c9_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let prod = |r: &RateVector| steady_state_spectral(r, 1e-14).map(|s| s.production_rate);
    for k in 0..20 {
        let n = rng.random_range(2..=30);
        let rates = random_rates(&mut rng, n, 0.9, 1.1);
        let s = sensitivities(&rates).map_err(|e| e.to_string())?;
        for i in 0..rates.len() {
            let h = 1e-6 * rates[i];
            let mut up = rates.as_slice().to_vec();
            let mut dn = up.clone();
            up[i] += h;
            dn[i] -= h;
            let fu = prod(&RateVector::new(up).unwrap()).map_err(|e| e.to_string())?;
            let fd = prod(&RateVector::new(dn).unwrap()).map_err(|e| e.to_string())?;
            let fd_grad = (fu - fd) / (2.0 * h);
            let err = (s.as_slice()[i] - fd_grad).abs() / fd_grad.abs();
            worst = worst.max(err);
            ensure(err <= 1e-5, || {
                format!(
                    "vector {k} (n={n}) index {i}: s={} fd={fd_grad}",
                    s.as_slice()[i]
                )
            })?;
        }
    }
    Ok(format!("worst relative error {worst:.2e} over 20 vectors"))
}

fn c10_steady_state_routes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut dr, mut de): (f64, f64) = (0.0, 0.0);
    for k in 0..50 {
        let n = rng.random_range(1..=50);
        let rates = random_rates(&mut rng, n, 0.1, 10.0);
        let a = steady_state_spectral(&rates, 1e-12).map_err(|e| e.to_string())?;
        let b = steady_state_shooting(&rates, 1e-12).map_err(|e| e.to_string())?;
        let d = (a.production_rate - b.production_rate).abs();
        ensure(d <= 1e-8, || format!("instance {k} (n={n}): dR={d:e}"))?;
        dr = dr.max(d);
        for (i, (x, y)) in a.e.iter().zip(&b.e).enumerate() {
            let d = (x - y).abs();
            ensure(d <= 1e-7, || format!("instance {k} (n={n}): de[{i}]={d:e}"))?;
            de = de.max(d);
        }
    }
    Ok(format!("max dR={dr:.2e} max de={de:.2e}"))
}

fn c11_dynamics() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1, 5, 20] {
        let sol = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
            let traj = simulate(&sol.rates, &x0, 2000.0, 0.01).map_err(|e| e.to_string())?;
            let err = traj
                .final_state()
                .iter()
                .zip(&sol.steady.e)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            ensure(err <= 1e-6, || {
                format!("n={n} seed={seed}: sup error {err:e}")
            })?;
        }
    }
    Ok(format!(
        "30 trajectories, worst sup error {worst:.2e} at t=2000"
    ))
}

fn c12_cross_solver() -> Outcome {
    let mut dl: f64 = 0.0;
    let mut kkt: f64 = 0.0;
    for n in 1..=60 {
        let a = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        let b = solve_equalization(n, 1e-10, 10_000).map_err(|e| format!("n={n}: {e}"))?;
        for (i, (x, y)) in a.lambda().iter().zip(b.lambda()).enumerate() {
            let d = (x - y).abs();
            ensure(d <= 1e-6, || format!("n={n} lambda[{i}]: {x} vs {y}"))?;
            dl = dl.max(d);
        }
        for s in [&a, &b] {
            ensure(s.kkt_residual <= 1e-8, || {
                format!("n={n} {}: kkt {:e}", s.diagnostics.method, s.kkt_residual)
            })?;
            kkt = kkt.max(s.kkt_residual);
        }
    }
    Ok(format!("max dlambda={dl:.2e} max kkt={kkt:.2e}"))
}

fn c13_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=100);
        let rates = random_rates(&mut rng, n, 0.1, 10.0);
        let base = perron_of(&rates).map_err(|e| e.to_string())?.sigma;
        for c in [0.25, 4.0] {
            let s = perron_of(&rates.scaled(c).unwrap())
                .map_err(|e| e.to_string())?
                .sigma;
            let want = base / c.sqrt();
            let err = (s - want).abs() / want;
            worst = worst.max(err);
            ensure(err <= 1e-10, || {
                format!("n={n} c={c}: relative error {err:e}")
            })?;
        }
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn c14_hyperbolicity() -> Outcome {
    let sqrt3 = 3f64.sqrt();
    let mut out = Vec::new();
    for n in [3, 20, 100] {
        let sol = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        let (lo, hi) = fixed_point_eigenvalues(sol.profile.r).map_err(|e| e.to_string())?;
        close(&format!("n={n} small eigenvalue"), lo, 2.0 - sqrt3, 1e-6)?;
        close(&format!("n={n} large eigenvalue"), hi, 2.0 + sqrt3, 1e-6)?;
        out.push(format!("n={n}: ({lo:.8}, {hi:.8})"));
    }
    Ok(out.join(" "))
}

fn c15_turnpike_width() -> Outcome {
    let w20 = turnpike_width(
        &solve_recursion(20, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?,
        0.1,
    );
    ensure(w20 == 2, || format!("width(n=20, eps=0.1) = {w20}, want 2"))?;
    let mut first = None;
    for n in 40..=200 {
        let sol = solve_recursion(n, DEFAULT_RECURSION_TOL).map_err(|e| e.to_string())?;
        let w = turnpike_width(&sol, 0.05);
        match first {
            None => first = Some(w),
            Some(w0) => ensure(w == w0, || {
                format!("width(n={n}, eps=0.05) = {w}, n=40 gave {w0}")
            })?,
        }
    }
    Ok(format!(
        "width(20, 0.1)=2, width(n, 0.05)={} for n=40..200",
        first.unwrap()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 15] = [
        ("golden n=1", c1_golden_n1),
        ("golden n=2", c2_golden_n2),
        ("golden n=3", c3_golden_n3),
        ("golden n=20", c4_golden_n20),
        ("golden n=100", c5_golden_n100),
        ("gap metric M(n) < 1", c6_gap_metric),
        ("optimal rate bounds", c7_theorem1),
        ("uniform-rate closed form", c8_toeplitz),
        ("sensitivity gradient", c9_gradient),
        ("steady-state routes", c10_steady_state_routes),
        ("dynamics convergence", c11_dynamics),
        ("cross-solver agreement", c12_cross_solver),
        ("rate scaling", c13_scaling),
        ("fixed-point hyperbolicity", c14_hyperbolicity),
        ("turnpike width", c15_turnpike_width),
    ];
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", k + 1);
            }
        }
    }
    std::panic::set_hook(default_hook);
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
