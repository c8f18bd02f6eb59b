use std::sync::Arc;

use super::{SaddleClass, SaddleProblem};
use crate::operators::{
    estimate_operator_norm, project_simplex, DenseLinearMap, HalfSquaredNorm, LinearMap, SimplexIndicator,
    ZeroSmooth,
};
use crate::{Error, Matrix, Result, Vector};

/// Largest side for which support enumeration is attempted.
const ENUMERATION_LIMIT: usize = 12;
const ENUMERATION_TOL: f64 = 1e-10;

fn norm_of(payoff: &Matrix) -> Result<f64> {
    estimate_operator_norm(&DenseLinearMap::new(payoff.clone()), 1e-13, 200_000)
}

fn game_parts(payoff: &Matrix) -> Result<(Arc<dyn LinearMap>, f64)> {
    if payoff.nrows() == 0 || payoff.ncols() == 0 {
        return Err(Error::InvalidParameter("payoff matrix must be nonempty".into()));
    }
    if payoff.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("payoff matrix"));
    }
    let norm = norm_of(payoff)?;
    // ⟨Kx, v⟩ = xᵀ M v, so K = Mᵀ maps row mixtures to column payoffs.
    let k = DenseLinearMap::new(payoff.transpose()).with_norm_hint(norm);
    Ok((Arc::new(k), norm))
}

/// Zero-sum matrix game `min_{x∈Δ_m} max_{v∈Δ_n} xᵀMv`.
///
/// The row player `x` minimizes. When the game is small enough, an
/// equilibrium found by support enumeration is stored as the known saddle.
pub fn make_matrix_game(payoff: Matrix) -> Result<SaddleProblem> {
    let (k, norm_k) = game_parts(&payoff)?;
    let (m, n) = payoff.shape();
    let known_saddle = solve_matrix_game(&payoff).map(|(x, v, _)| (x, v));
    Ok(SaddleProblem {
        f: Arc::new(SimplexIndicator::new(m)),
        gstar: Arc::new(SimplexIndicator::new(n)),
        k,
        h: Arc::new(ZeroSmooth::new(m)),
        l: Arc::new(ZeroSmooth::new(n)),
        known_saddle,
        norm_k,
        class: SaddleClass::Bilinear { payoff },
    })
}

/// Matrix game with the dual regularizer `ℓ = (β/2)‖·‖²`, which turns the
/// coupling into a Moreau-smoothed max and makes the dual saddle unique.
pub fn make_smoothed_saddle(payoff: Matrix, beta: f64) -> Result<SaddleProblem> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let (k, norm_k) = game_parts(&payoff)?;
    let (m, n) = payoff.shape();
    let known_saddle = smoothed_reference(&payoff, beta, norm_k);
    let mut problem = SaddleProblem {
        f: Arc::new(SimplexIndicator::new(m)),
        gstar: Arc::new(SimplexIndicator::new(n)),
        k,
        h: Arc::new(ZeroSmooth::new(m)),
        l: Arc::new(HalfSquaredNorm::new(n, beta)),
        known_saddle: None,
        norm_k,
        class: SaddleClass::Smoothed { payoff, beta },
    };
    if let Some((x, v)) = known_saddle {
        if duality_gap(&problem, &x, &v).is_ok_and(|g| g <= 1e-9) {
            problem.known_saddle = Some((x, v));
        }
    }
    Ok(problem)
}

/// `G(x, v) = h(x) + f(x) + ⟨Kx, v⟩ − g*(v) − ℓ(v)` as an extended real.
///
/// `x ∉ dom f` gives `+∞`; otherwise `v ∉ dom g*` gives `−∞`.
pub fn evaluate_gap(problem: &SaddleProblem, x: &Vector, v: &Vector) -> Result<f64> {
    let kx = problem.k.apply(x)?;
    crate::check_dim(problem.dual_dim(), v.len())?;
    let fx = problem.f.value(x);
    if fx == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let gv = problem.gstar.value(v);
    if gv == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(problem.h.eval(x) + fx + kx.dot(v) - gv - problem.l.eval(v))
}

/// `sup_{v'} G(x, v')`, exact for the shipped classes.
pub fn primal_value(problem: &SaddleProblem, x: &Vector) -> Result<f64> {
    let kx = problem.k.apply(x)?;
    match &problem.class {
        SaddleClass::Bilinear { .. } => Ok(kx.max()),
        SaddleClass::Smoothed { beta, .. } => {
            let best = project_simplex(&(&kx / *beta));
            Ok(kx.dot(&best) - 0.5 * beta * best.norm_squared())
        }
        SaddleClass::General => Err(Error::NotComputable("duality gap for a general saddle problem".into())),
    }
}

/// `inf_{x'} G(x', v)`, exact for the shipped classes.
pub fn dual_value(problem: &SaddleProblem, v: &Vector) -> Result<f64> {
    let ktv = problem.k.adjoint(v)?;
    match &problem.class {
        SaddleClass::Bilinear { .. } => Ok(ktv.min()),
        SaddleClass::Smoothed { beta, .. } => Ok(ktv.min() - 0.5 * beta * v.norm_squared()),
        SaddleClass::General => Err(Error::NotComputable("duality gap for a general saddle problem".into())),
    }
}

/// `sup_{v'} G(x, v') − inf_{x'} G(x', v)`; zero exactly at saddle points.
pub fn duality_gap(problem: &SaddleProblem, x: &Vector, v: &Vector) -> Result<f64> {
    if let SaddleClass::General = problem.class {
        return Err(Error::NotComputable("duality gap for a general saddle problem".into()));
    }
    if problem.f.value(x).is_infinite() || problem.gstar.value(v).is_infinite() {
        return Err(Error::InvalidParameter("duality gap needs feasible points".into()));
    }
    Ok((primal_value(problem, x)? - dual_value(problem, v)?).max(0.0))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Solves the bordered indifference system `[[M_S, −1], [1ᵀ, 0]] [p; w] = [0; 1]`.
fn indifference(sub: &Matrix) -> Option<(Vector, f64)> {
    let k = sub.nrows();
    let mut sys = Matrix::zeros(k + 1, k + 1);
    sys.view_mut((0, 0), (k, k)).copy_from(sub);
    for i in 0..k {
        sys[(i, k)] = -1.0;
        sys[(k, i)] = 1.0;
    }
    let mut rhs = Vector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, k).into_owned(), sol[k]))
}

/// Equilibrium `(x*, v*, value)` of `min_x max_v xᵀMv` by enumerating square
/// supports and solving the indifference equations on each.
///
/// Every matrix game has an equilibrium on a square support with a
/// nonsingular bordered system, so the search succeeds for any game within
/// the size limit; `None` is returned for larger games.
pub fn solve_matrix_game(payoff: &Matrix) -> Option<(Vector, Vector, f64)> {
    let (m, n) = payoff.shape();
    if m == 0 || n == 0 || m > ENUMERATION_LIMIT || n > ENUMERATION_LIMIT {
        return None;
    }
    let scale = 1.0 + payoff.amax();
    for k in 1..=m.min(n) {
        let row_sets = subsets(m, k);
        let col_sets = subsets(n, k);
        for rows in &row_sets {
            for cols in &col_sets {
                let sub = Matrix::from_fn(k, k, |i, j| payoff[(rows[i], cols[j])]);
                let Some((v_s, w)) = indifference(&sub) else { continue };
                let Some((x_s, w2)) = indifference(&sub.transpose()) else { continue };
                if v_s.min() < -ENUMERATION_TOL || x_s.min() < -ENUMERATION_TOL {
                    continue;
                }
                if (w - w2).abs() > ENUMERATION_TOL * scale {
                    continue;
                }
                let mut x = Vector::zeros(m);
                let mut v = Vector::zeros(n);
                for (i, &r) in rows.iter().enumerate() {
                    x[r] = x_s[i].max(0.0);
                }
                for (j, &c) in cols.iter().enumerate() {
                    v[c] = v_s[j].max(0.0);
                }
                x /= x.sum();
                v /= v.sum();
                // Rows cannot undercut the value; columns cannot exceed it.
                let row_payoffs = payoff * &v;
                let col_payoffs = payoff.tr_mul(&x);
                if row_payoffs.min() >= w - ENUMERATION_TOL * scale
                    && col_payoffs.max() <= w + ENUMERATION_TOL * scale
                {
                    return Some((x, v, w));
                }
            }
        }
    }
    None
}

/// Damped projected fixed-point iteration on the smoothed primal function
/// `φ(x) = max_{v∈Δ} xᵀMv − (β/2)‖v‖²`, whose gradient is `M v(x)` with
/// `v(x) = P_Δ(Mᵀx/β)`.
fn smoothed_reference(payoff: &Matrix, beta: f64, norm: f64) -> Option<(Vector, Vector)> {
    let (m, _) = payoff.shape();
    let best_response = |x: &Vector| project_simplex(&(payoff.tr_mul(x) / beta));
    let mut x = Vector::from_element(m, 1.0 / m as f64);
    if norm == 0.0 {
        let v = best_response(&x);
        return Some((x, v));
    }
    let step = beta / (norm * norm);
    for _ in 0..2_000_000 {
        let v = best_response(&x);
        let target = project_simplex(&(&x - payoff * &v * step));
        let next = &x * 0.5 + target * 0.5;
        let moved = (&next - &x).amax();
        x = next;
        if moved <= 1e-14 {
            let v = best_response(&x);
            return Some((x, v));
        }
    }
    None
}
