use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::InclusionProblem;
use crate::operators::{L1Norm, LeastSquares, ProxFunction, SmoothFunction, Subdifferential};
use crate::{Error, Matrix, Result, Vector};

/// Stopping threshold of the reference solver, on the proximal-gradient
/// residual `‖x − prox_{λ‖·‖₁}(x − ∇h(x))‖_∞`.
pub const REFERENCE_TOL: f64 = 1e-12;
const REFERENCE_MAX_SWEEPS: usize = 2_000_000;

/// `minimize f(x) + h(x)` with `f = λ‖·‖₁` and `h(x) = (1/2m)‖Ax − y‖²`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub f: Arc<dyn ProxFunction>,
    pub h: Arc<LeastSquares>,
    pub lambda: f64,
    /// Lipschitz constant of `∇h`.
    pub mu_h: f64,
    pub reference: Vector,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("lambda", &self.lambda)
            .field("mu_h", &self.mu_h)
            .field("reference", &self.reference)
            .finish()
    }
}

impl CompositeProblem {
    pub fn objective(&self, x: &Vector) -> f64 {
        self.f.value(x) + self.h.eval(x)
    }

    /// The inclusion `0 ∈ ∂f(x) + ∇h(x)` with the row gradients as finite-sum components.
    pub fn as_inclusion(&self) -> Result<InclusionProblem> {
        Ok(InclusionProblem {
            a: Arc::new(Subdifferential(self.f.clone())),
            b: Arc::new(self.h.gradient_map().clone()),
            known_zero: Some(self.reference.clone()),
            mu: self.mu_h,
            nu: 0.0,
            components: Some(self.h.row_gradients()?),
        })
    }
}

pub fn make_lasso(design: Matrix, targets: Vector, lambda: f64) -> Result<CompositeProblem> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let reference = lasso_reference(&design, &targets, lambda)?;
    let h = LeastSquares::new(design, targets)?;
    let mu_h = h.gradient_lipschitz();
    Ok(CompositeProblem { f: Arc::new(L1Norm::new(lambda)), h: Arc::new(h), lambda, mu_h, reference })
}

/// Lasso instance with Gaussian design and targets `A x_true + noise`, where
/// `x_true` has roughly half of its coordinates zero.
pub fn make_random_lasso(rows: usize, cols: usize, lambda: f64, seed: u64) -> Result<CompositeProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let design = Matrix::from_fn(rows, cols, |_, _| normal());
    let truth = Vector::from_fn(cols, |i, _| if i % 2 == 0 { normal() } else { 0.0 });
    let noise = Vector::from_fn(rows, |_, _| 0.1 * normal());
    let targets = &design * truth + noise;
    make_lasso(design, targets, lambda)
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// High-precision lasso minimizer by cyclic coordinate minimization.
///
/// Each coordinate update is the exact one-dimensional minimizer; sweeps
/// continue until the proximal-gradient residual drops below
/// [`REFERENCE_TOL`].
pub fn lasso_reference(design: &Matrix, targets: &Vector, lambda: f64) -> Result<Vector> {
    let (m, d) = design.shape();
    crate::check_dim(m, targets.len())?;
    if m == 0 {
        return Err(Error::InvalidParameter("design needs at least one row".into()));
    }
    let mf = m as f64;
    let col_sq: Vec<f64> = (0..d).map(|j| design.column(j).norm_squared() / mf).collect();
    let mut x = Vector::zeros(d);
    let mut resid = -targets.clone();

    for sweep in 0..REFERENCE_MAX_SWEEPS {
        for j in 0..d {
            let old = x[j];
            let new = if col_sq[j] == 0.0 {
                0.0
            } else {
                let g = design.column(j).dot(&resid) / mf;
                soft(old - g / col_sq[j], lambda / col_sq[j])
            };
            if new != old {
                resid.axpy(new - old, &design.column(j), 1.0);
                x[j] = new;
            }
        }
        if sweep % 16 == 15 || d <= 1 {
            resid = design * &x - targets;
            let grad = design.tr_mul(&resid) / mf;
            let kkt = x
                .iter()
                .zip(grad.iter())
                .map(|(xi, gi)| (xi - soft(xi - gi, lambda)).abs())
                .fold(0.0, f64::max);
            if kkt <= REFERENCE_TOL {
                return Ok(x);
            }
        }
    }
    Err(Error::NotComputable("lasso reference solver did not reach its tolerance".into()))
}
