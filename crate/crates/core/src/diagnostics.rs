//! Per-iteration metrics, pathwise inequality checks and rate fitting.

use serde::{Deserialize, Serialize};

use crate::operators::LipschitzMonotone;
use crate::problems::InclusionProblem;
use crate::schedules::StepSchedule;
use crate::solvers::Trajectory;
use crate::{check_dim, Error, Result, Vector, ONE_PLUS_SQRT2};

/// Metrics of the state after `n` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: u64,
    /// The step `γ_{n−1}` that produced `x_n`.
    pub gamma: f64,
    /// `‖x_n − x̄‖²` (plus the dual part for saddle problems).
    pub dist_sq: Option<f64>,
    /// `‖x_n − x_{n−1}‖`.
    pub resid: f64,
    /// `‖r_{n−1} − B y_{n−1}‖²`.
    pub draw_err_sq: Option<f64>,
    /// Duality gap at the ergodic averages.
    pub ergodic_gap: Option<f64>,
    pub wall_ns: Option<u64>,
}

/// Relative slack tolerance of the inequality checks.
pub const INEQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub n: u64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub pass: bool,
    /// Whether the inequality is claimed at this `n`. Failures with
    /// `precondition_met = false` are reported, not violations.
    pub precondition_met: bool,
}

impl InequalityReport {
    pub fn new(n: u64, lhs: f64, rhs: f64, precondition_met: bool) -> Self {
        let slack = rhs - lhs;
        let pass = slack >= -INEQUALITY_TOL * (1.0 + rhs.abs());
        InequalityReport { n, lhs, rhs, slack, pass, precondition_met }
    }

    /// Fails only where the inequality is claimed.
    pub fn violated(&self) -> bool {
        self.precondition_met && !self.pass
    }
}

fn require_exact(traj: &Trajectory) -> Result<()> {
    if !traj.exact {
        return Err(Error::Refused("pathwise checks need an exact-oracle trajectory".into()));
    }
    Ok(())
}

/// Checks the one-step energy estimate at every `1 ≤ n < N`:
///
/// ```text
/// ‖x_{n+1}−x‖² + (3 − γ_n/γ_{n−1})‖x_{n+1}−x_n‖² + (γ_n/γ_{n−1})‖x_{n+1}−y_n‖² + 2γ_n⟨r_n−Bx, x_{n+1}−x_n⟩
///   ≤ ‖x_n−x‖² + 2γ_n⟨r_{n−1}−Bx, x_n−x_{n−1}⟩ + 2γ_n⟨r_{n−1}−r_n, x_{n+1}−y_n⟩
///     + (γ_n/γ_{n−1})‖x_n−y_n‖² + 2γ_n⟨r_n−By_n, x−y_n⟩
/// ```
///
/// `x_ref` must be a zero of `A + B`.
pub fn check_lemma_main(
    traj: &Trajectory,
    problem: &InclusionProblem,
    x_ref: &Vector,
) -> Result<Vec<InequalityReport>> {
    require_exact(traj)?;
    check_dim(problem.dim(), x_ref.len())?;
    let bx = problem.b.eval(x_ref)?;
    let big_n = traj.len() as i64;
    let mut out = Vec::new();
    for n in 1..big_n {
        let (g, g_prev) = (traj.gamma(n), traj.gamma(n - 1));
        let ratio = g / g_prev;
        let (x_next, x_n, x_prev) = (traj.x(n + 1), traj.x(n), traj.x(n - 1));
        let y = traj.y(n);
        let r = &traj.draws[n as usize];
        let r_prev = &traj.draws[(n - 1) as usize];
        let by = problem.b.eval(&y)?;

        let lhs = (x_next - x_ref).norm_squared()
            + (3.0 - ratio) * (x_next - x_n).norm_squared()
            + ratio * (x_next - &y).norm_squared()
            + 2.0 * g * (r - &bx).dot(&(x_next - x_n));
        let rhs = (x_n - x_ref).norm_squared()
            + 2.0 * g * (r_prev - &bx).dot(&(x_n - x_prev))
            + 2.0 * g * (r_prev - r).dot(&(x_next - &y))
            + ratio * (x_n - &y).norm_squared()
            + 2.0 * g * (r - &by).dot(&(x_ref - &y));
        out.push(InequalityReport::new(n as u64, lhs, rhs, true));
    }
    Ok(out)
}

/// Checks the Lipschitz estimate at every `0 ≤ n < N`:
///
/// ```text
/// 2⟨By_{n−1} − By_n, x_{n+1} − y_n⟩ ≤ μ(1+√2)‖y_n−x_n‖² + μ‖x_n−y_{n−1}‖² + μ√2‖y_n−x_{n+1}‖²
/// ```
pub fn check_lemma_qes(traj: &Trajectory, b: &dyn LipschitzMonotone, mu: f64) -> Result<Vec<InequalityReport>> {
    require_exact(traj)?;
    let mut out = Vec::new();
    for n in 0..traj.len() as i64 {
        let (x_next, x_n) = (traj.x(n + 1), traj.x(n));
        let (y, y_prev) = (traj.y(n), traj.y(n - 1));
        let lhs = 2.0 * (b.eval(&y_prev)? - b.eval(&y)?).dot(&(x_next - &y));
        let rhs = mu * ONE_PLUS_SQRT2 * (&y - x_n).norm_squared()
            + mu * (x_n - &y_prev).norm_squared()
            + mu * std::f64::consts::SQRT_2 * (&y - x_next).norm_squared();
        out.push(InequalityReport::new(n as u64, lhs, rhs, true));
    }
    Ok(out)
}

/// Checks `T_n ≥ ‖x_n − x‖²/(2γ_n)` at every `1 ≤ n ≤ N`, with
///
/// ```text
/// T_n = ‖x_n−x‖²/γ_n + μ‖x_n−y_{n−1}‖² + (1/γ_{n−1} + μ(1+√2))‖x_n−x_{n−1}‖²
///       + 2⟨By_{n−1} − Bx, x_n − x_{n−1}⟩
/// ```
///
/// The bound is claimed only where `1/(2γ_n) ≥ μ`.
pub fn check_t_lower_bound(
    traj: &Trajectory,
    b: &dyn LipschitzMonotone,
    x_ref: &Vector,
    schedule: &StepSchedule,
    mu: f64,
) -> Result<Vec<InequalityReport>> {
    require_exact(traj)?;
    check_dim(b.dim(), x_ref.len())?;
    let bx = b.eval(x_ref)?;
    let mut out = Vec::new();
    for n in 1..=traj.len() as i64 {
        let g = schedule.gamma(n as u64);
        let g_prev = schedule.gamma((n - 1) as u64);
        let (x_n, x_prev) = (traj.x(n), traj.x(n - 1));
        let y_prev = traj.y(n - 1);
        let dist = (x_n - x_ref).norm_squared();
        let alpha = (b.eval(&y_prev)? - &bx).dot(&(x_n - x_prev));
        let t = dist / g
            + mu * (x_n - &y_prev).norm_squared()
            + (1.0 / g_prev + mu * ONE_PLUS_SQRT2) * (x_n - x_prev).norm_squared()
            + 2.0 * alpha;
        out.push(InequalityReport::new(n as u64, dist / (2.0 * g), t, 1.0 / (2.0 * g) >= mu));
    }
    Ok(out)
}

/// Least-squares fit `log value ≈ slope·log n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits a power law to the points of `series` with `n` inside `window`
/// (inclusive).
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    let inside: Vec<(usize, f64, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, &(n, _))| n >= lo && n <= hi)
        .map(|(i, &(n, v))| (i, n, v))
        .collect();
    let bad: Vec<usize> = inside.iter().filter(|(_, n, v)| !(*v > 0.0 && *n > 0.0)).map(|(i, ..)| *i).collect();
    if !bad.is_empty() {
        return Err(Error::NonPositive { indices: bad });
    }
    let pts: Vec<(f64, f64)> = inside.iter().map(|&(_, n, v)| (n.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || !(sxx > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs two distinct n in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx, points: pts.len() })
}

/// Which record column to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DistSq,
    Resid,
    DrawErrSq,
    ErgodicGap,
}

impl Metric {
    pub fn get(self, r: &RunRecord) -> Option<f64> {
        match self {
            Metric::DistSq => r.dist_sq,
            Metric::Resid => Some(r.resid),
            Metric::DrawErrSq => r.draw_err_sq,
            Metric::ErgodicGap => r.ergodic_gap,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::DistSq => "dist_sq",
            Metric::Resid => "resid",
            Metric::DrawErrSq => "draw_err_sq",
            Metric::ErgodicGap => "ergodic_gap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub n: u64,
    pub mean: f64,
    /// Sample standard deviation over `√k`.
    pub stderr: f64,
}

/// Pointwise Monte Carlo mean and standard error of `metric` across runs.
pub fn aggregate_expectation(runs: &[&[RunRecord]], metric: Metric) -> Result<Vec<MeanPoint>> {
    if runs.len() < 2 {
        return Err(Error::InvalidParameter(format!("aggregation needs at least 2 runs, got {}", runs.len())));
    }
    let len = runs[0].len();
    if runs.iter().any(|r| r.len() != len) {
        return Err(Error::MisalignedGrids);
    }
    let k = runs.len() as f64;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let n = runs[0][i].n;
        let mut values = Vec::with_capacity(runs.len());
        for run in runs {
            if run[i].n != n {
                return Err(Error::MisalignedGrids);
            }
            values.push(metric.get(&run[i]).ok_or_else(|| {
                Error::NotComputable(format!("{} absent at n = {n}", metric.name()))
            })?);
        }
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        out.push(MeanPoint { n, mean, stderr: (var / k).sqrt() });
    }
    Ok(out)
}
