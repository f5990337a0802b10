//! Checks of the proven bounds and structural properties on a computed optimum.
//!
//! Every check records its raw left and right sides. Strict inequalities
//! pass when they hold up to an absolute slack of `1e-12` and are flagged
//! marginal when they hold by less than that slack. Where the solution
//! carries accurately computed gaps `4/σ̄² − λ̄_i`, the margin of a check is
//! taken from the gaps instead of subtracting two nearly equal numbers.

use serde::Serialize;

use crate::optimizer::OptimalSolution;

/// Absolute slack for strict inequalities.
pub const SLACK: f64 = 1e-12;
/// Relative tolerance for equalities.
pub const EQ_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `lhs < rhs`
    Less,
    /// `lhs = rhs` up to [`EQ_TOL`] relative
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// `rhs − lhs` for inequalities, `|lhs − rhs|` for equalities.
    pub margin: f64,
    pub passed: bool,
    pub marginal: bool,
}

impl Check {
    /// `lhs < rhs`.
    pub fn less(name: impl Into<String>, lhs: f64, rhs: f64) -> Check {
        Check::less_with_margin(name, lhs, rhs, rhs - lhs)
    }

    /// `lhs < rhs` where `margin = rhs − lhs` is known more accurately than
    /// the difference of the two sides.
    pub fn less_with_margin(name: impl Into<String>, lhs: f64, rhs: f64, margin: f64) -> Check {
        let passed = margin > -SLACK;
        Check {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::Less,
            margin,
            passed,
            marginal: passed && margin < SLACK,
        }
    }

    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64) -> Check {
        let diff = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        Check {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::Equal,
            margin: diff,
            passed: diff <= EQ_TOL * scale,
            marginal: false,
        }
    }
}

/// Outcome of a set of checks on one solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub checks: Vec<Check>,
    /// `max_{i ≤ ⌊n/2⌋} 2^i (4/σ̄² − λ̄_i)`.
    #[serde(rename = "M")]
    pub max_gap: f64,
    /// `(ε, count of |λ̄_i − 1| ≥ ε)`.
    pub turnpike_width: Vec<(f64, usize)>,
    pub all_passed: bool,
}

impl BoundsReport {
    fn new(sol: &OptimalSolution, checks: Vec<Check>) -> BoundsReport {
        let all_passed = checks.iter().all(|c| c.passed);
        BoundsReport {
            n: sol.n,
            checks,
            max_gap: max_gap_metric(sol),
            turnpike_width: Vec::new(),
            all_passed,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn marginal(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.marginal)
    }

    /// Combines two reports on the same solution.
    pub fn merge(mut self, other: BoundsReport) -> BoundsReport {
        debug_assert_eq!(self.n, other.n);
        self.checks.extend(other.checks);
        self.turnpike_width.extend(other.turnpike_width);
        self.all_passed = self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn with_turnpike_widths(mut self, sol: &OptimalSolution, eps: &[f64]) -> BoundsReport {
        self.turnpike_width = eps.iter().map(|&e| (e, turnpike_width(sol, e))).collect();
        self
    }
}

/// The bounds on `σ̄` and on every `λ̄_i`, and for `n ≥ 36` the
/// exponential gap bounds. Empty for `n = 1`, where the bounds are not
/// claimed.
pub fn check_theorem1(sol: &OptimalSolution) -> BoundsReport {
    let n = sol.n;
    let mut checks = Vec::new();
    if n < 2 {
        return BoundsReport::new(sol, checks);
    }
    let nf = n as f64;
    let ln2 = std::f64::consts::LN_2;
    let sigma = sol.sigma;
    let lam = sol.lambda();
    let gaps = &sol.gaps;
    let top = 4.0 / (sigma * sigma);
    let half = n / 2;

    checks.push(Check::less(
        "sigma_lower",
        2.0 * (1.0 - 4.0 * ln2 / (nf + 1.0)).sqrt(),
        sigma,
    ));
    checks.push(Check::less(
        "sigma_upper",
        sigma,
        2.0 * (1.0 - 1.0 / (nf + 1.0)).sqrt(),
    ));

    // λ̄_i > top·(1 − δ)  ⇔  gap_i < top·δ
    let lower = |name: String, i: usize, delta: f64| {
        Check::less_with_margin(name, top * (1.0 - delta), lam[i], top * delta - gaps[i])
    };
    let upper = |name: String, i: usize| Check::less_with_margin(name, lam[i], top, gaps[i]);

    for i in 0..half.saturating_sub(1) {
        checks.push(lower(
            format!("rate_lower[{i}]"),
            i,
            ln2 / 2f64.powi(i as i32),
        ));
        checks.push(upper(format!("rate_upper[{i}]"), i));
    }
    if n.is_multiple_of(2) {
        let delta = 4.0 / 3.0 * ln2 / 2f64.powi(half as i32);
        checks.push(lower(format!("middle_lower[{half}]"), half, delta));
        checks.push(upper(format!("middle_upper[{half}]"), half));
    } else {
        let delta = ln2 / 2f64.powi(half as i32);
        checks.push(lower(format!("middle_lower[{half}]"), half, delta));
        checks.push(Check::equal(
            format!("middle_equal[{half}]"),
            lam[half],
            lam[half + 1],
        ));
        checks.push(upper(format!("middle_upper[{half}]"), half));
    }
    if n >= 36 {
        for (i, &gap) in gaps.iter().enumerate().take(half + 1) {
            checks.push(Check::less_with_margin(
                format!("gap_positive[{i}]"),
                0.0,
                gap,
                gap,
            ));
            let bound = 2f64.powi(-(i as i32));
            checks.push(Check::less_with_margin(
                format!("gap_decay[{i}]"),
                gap,
                bound,
                bound - gap,
            ));
        }
    }
    BoundsReport::new(sol, checks)
}

/// Symmetry and monotonicity of `λ̄`, the steady-state identities, the
/// bounds on the recursion sequence and symmetry of the Perron vector.
pub fn check_structure(sol: &OptimalSolution) -> BoundsReport {
    let n = sol.n;
    let lam = sol.lambda();
    let gaps = &sol.gaps;
    let e = &sol.steady.e;
    let p = &sol.profile;
    let v = &sol.perron.v;
    let half = n / 2;
    let mut checks = Vec::new();

    for i in 0..=half {
        checks.push(Check::equal(
            format!("rate_symmetry[{i}]"),
            lam[i],
            lam[n - i],
        ));
    }
    for i in 0..half {
        checks.push(Check::less_with_margin(
            format!("rate_increasing[{i}]"),
            lam[i],
            lam[i + 1],
            gaps[i] - gaps[i + 1],
        ));
    }
    // e is 0-based: e[i-1] = ē_i
    for i in 1..=n {
        checks.push(Check::equal(
            format!("density_symmetry[{i}]"),
            e[i - 1],
            1.0 - e[n - i],
        ));
    }
    if n % 2 == 1 {
        checks.push(Check::equal(
            format!("density_middle[{}]", half + 1),
            e[half],
            0.5,
        ));
    }
    for i in 1..=n {
        let x = e[i - 1];
        checks.push(Check::equal(
            format!("density_ratio[{i}]"),
            x / (1.0 - x),
            lam[i] / lam[i - 1],
        ));
    }

    let a = &p.a;
    let d = &p.deviation;
    for i in 0..a.len() {
        checks.push(Check::less_with_margin(
            format!("a_below_q[{i}]"),
            a[i],
            p.q,
            d[i],
        ));
    }
    let growth_last = if n % 2 == 1 { half + 1 } else { half };
    for i in 1..=growth_last {
        let k = 2f64.powi(i as i32);
        checks.push(Check::less(
            format!("a_growth[{i}]"),
            p.q.powf((k - 1.0) / k),
            a[i + 1],
        ));
    }
    for i in 1..=half + 1 {
        checks.push(Check::less_with_margin(
            format!("a_ordering[{i}]"),
            a[i - 1],
            a[i + 1],
            d[i - 1] - d[i + 1],
        ));
    }
    for i in 0..(n + 3) / 2 {
        checks.push(Check::less_with_margin(
            format!("a_increasing[{i}]"),
            a[i],
            a[i + 1],
            d[i] - d[i + 1],
        ));
    }
    let dim = v.len();
    for i in 0..dim / 2 {
        checks.push(Check::equal(
            format!("v_symmetry[{}]", i + 1),
            v[i],
            v[dim - 1 - i],
        ));
    }
    BoundsReport::new(sol, checks)
}

/// `2^i (4/σ̄² − λ̄_i)` for `i = 0..=⌊n/2⌋`.
pub fn gap_metric_terms(sol: &OptimalSolution) -> Vec<f64> {
    (0..=sol.n / 2)
        .map(|i| 2f64.powi(i as i32) * sol.gaps[i])
        .collect()
}

/// `M(n) = max_{i ≤ ⌊n/2⌋} 2^i (4/σ̄² − λ̄_i)`.
pub fn max_gap_metric(sol: &OptimalSolution) -> f64 {
    gap_metric_terms(sol)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that every term of `M(n)` is positive and, for `n > 1`, that `M(n) < 1`.
pub fn check_gap_metric(sol: &OptimalSolution) -> BoundsReport {
    let mut checks: Vec<Check> = gap_metric_terms(sol)
        .into_iter()
        .enumerate()
        .map(|(i, t)| Check::less_with_margin(format!("gap_term_positive[{i}]"), 0.0, t, t))
        .collect();
    if sol.n > 1 {
        checks.push(Check::less(
            "gap_metric_below_one",
            max_gap_metric(sol),
            1.0,
        ));
    }
    BoundsReport::new(sol, checks)
}

/// Number of indices with `|λ̄_i − 1| ≥ eps`.
pub fn turnpike_width(sol: &OptimalSolution, eps: f64) -> usize {
    sol.lambda()
        .iter()
        .filter(|l| (*l - 1.0).abs() >= eps)
        .count()
}

/// All checks on one solution plus turnpike widths for `eps`.
pub fn verify(sol: &OptimalSolution, eps: &[f64]) -> BoundsReport {
    check_theorem1(sol)
        .merge(check_structure(sol))
        .merge(check_gap_metric(sol))
        .with_turnpike_widths(sol, eps)
}
