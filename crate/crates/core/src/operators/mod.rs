//! Operators: resolvents of maximal monotone operators, proximity operators,
//! Lipschitz monotone maps and bounded linear maps.
//!
//! Every trait exposes a raw `*_unchecked` evaluation plus a checked entry
//! point that validates dimensions, finiteness and step sizes. Instances are
//! immutable after construction and can be shared across threads.

mod linear;
mod maps;
mod prox;

use std::fmt::Debug;
use std::sync::Arc;

pub use linear::{estimate_operator_norm, DenseLinearMap, LinearMap};
pub use maps::{
    AffineMap, GradientMap, HalfSquaredNorm, LeastSquares, ScaledIdentity, SmoothFunction,
    ZeroMap, ZeroSmooth,
};
pub use prox::{
    project_simplex, BallIndicator, BoxIndicator, L1Norm, SimplexIndicator, SquaredNorm,
    ZeroFunction, FEASIBILITY_TOL,
};

use crate::{check_dim, check_finite, check_step, Result, Vector};

/// A monotone, `μ`-Lipschitz single-valued map `B`.
pub trait LipschitzMonotone: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// `B(x)` without argument validation.
    fn eval_unchecked(&self, x: &Vector) -> Vector;

    /// Declared Lipschitz constant `μ`.
    fn lipschitz(&self) -> f64;

    /// Strong monotonicity modulus `ν_B` (zero when merely monotone).
    fn strong_monotonicity(&self) -> f64 {
        0.0
    }

    fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        check_finite("map argument", x)?;
        Ok(self.eval_unchecked(x))
    }
}

/// A maximal monotone operator `A`, accessed only through `J_{γA} = (Id + γA)^{-1}`.
pub trait ResolvableOperator: Send + Sync + Debug {
    /// Fixed dimension, or `None` for operators acting coordinatewise in any dimension.
    fn space_dim(&self) -> Option<usize> {
        None
    }

    fn resolvent_unchecked(&self, gamma: f64, z: &Vector) -> Vector;

    /// Strong monotonicity modulus `ν_A`.
    fn strong_monotonicity(&self) -> f64 {
        0.0
    }

    /// Radius of a ball centred at the origin containing `dom A`, when bounded.
    fn domain_bound(&self) -> Option<f64> {
        None
    }

    fn resolvent(&self, gamma: f64, z: &Vector) -> Result<Vector> {
        check_step(gamma)?;
        if let Some(d) = self.space_dim() {
            check_dim(d, z.len())?;
        }
        check_finite("resolvent argument", z)?;
        Ok(self.resolvent_unchecked(gamma, z))
    }
}

/// A proper lower semicontinuous convex function with a computable proximity operator.
pub trait ProxFunction: Send + Sync + Debug {
    fn dim(&self) -> Option<usize> {
        None
    }

    /// Extended-real value; `f64::INFINITY` outside the effective domain.
    fn value(&self, x: &Vector) -> f64;

    /// `prox_{γf}(x) = argmin_y f(y) + ‖x − y‖²/(2γ)` without validation.
    fn prox_unchecked(&self, gamma: f64, x: &Vector) -> Vector;

    fn strong_convexity(&self) -> f64 {
        0.0
    }

    fn domain_radius(&self) -> Option<f64> {
        None
    }

    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        check_step(gamma)?;
        if let Some(d) = self.dim() {
            check_dim(d, x.len())?;
        }
        check_finite("prox argument", x)?;
        Ok(self.prox_unchecked(gamma, x))
    }
}

/// The subdifferential `∂f` of a [`ProxFunction`], whose resolvent is the prox.
#[derive(Debug, Clone)]
pub struct Subdifferential(pub Arc<dyn ProxFunction>);

impl Subdifferential {
    pub fn new(f: impl ProxFunction + 'static) -> Self {
        Subdifferential(Arc::new(f))
    }
}

impl ResolvableOperator for Subdifferential {
    fn space_dim(&self) -> Option<usize> {
        self.0.dim()
    }

    fn resolvent_unchecked(&self, gamma: f64, z: &Vector) -> Vector {
        self.0.prox_unchecked(gamma, z)
    }

    fn strong_monotonicity(&self) -> f64 {
        self.0.strong_convexity()
    }

    fn domain_bound(&self) -> Option<f64> {
        self.0.domain_radius()
    }
}

/// Checked evaluation `B(x)`.
pub fn apply_map(b: &dyn LipschitzMonotone, x: &Vector) -> Result<Vector> {
    b.eval(x)
}

/// Checked resolvent `J_{γA}(z)`.
pub fn resolvent(a: &dyn ResolvableOperator, gamma: f64, z: &Vector) -> Result<Vector> {
    a.resolvent(gamma, z)
}

/// `prox_{γf*}(z)` through the Moreau decomposition
/// `z = prox_{γf*}(z) + γ·prox_{f/γ}(z/γ)`, so only the prox of `f` is needed.
pub fn prox_conjugate(f: &dyn ProxFunction, gamma: f64, z: &Vector) -> Result<Vector> {
    check_step(gamma)?;
    let inner = f.prox(1.0 / gamma, &(z / gamma))?;
    Ok(z - inner * gamma)
}
