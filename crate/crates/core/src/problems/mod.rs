//! Benchmark instances with certified reference solutions, and the
//! primal-dual gap.
//!
//! Reference points are produced by oracles that share no code path with the
//! solvers: a dense linear solve for affine inclusions, cyclic coordinate
//! minimization for the lasso, support enumeration for matrix games and a
//! damped projected fixed-point iteration for smoothed games.

mod affine;
mod games;
mod lasso;

use std::fmt;
use std::sync::Arc;

pub use affine::{affine_inclusion, make_affine_inclusion, monotone_affine_inclusion};
pub use games::{duality_gap, evaluate_gap, make_matrix_game, make_smoothed_saddle, solve_matrix_game};
pub use lasso::{lasso_reference, make_lasso, make_random_lasso, CompositeProblem};

use crate::operators::{LinearMap, LipschitzMonotone, ProxFunction, ResolvableOperator, SmoothFunction};
use crate::{Matrix, Result, Vector};

/// Find `x̄` with `0 ∈ A x̄ + B x̄`.
#[derive(Clone)]
pub struct InclusionProblem {
    pub a: Arc<dyn ResolvableOperator>,
    pub b: Arc<dyn LipschitzMonotone>,
    pub known_zero: Option<Vector>,
    /// Lipschitz constant of `B`.
    pub mu: f64,
    /// Strong monotonicity modulus of `A` (zero if none).
    pub nu: f64,
    /// Finite-sum decomposition `B = mean(B_i)`, when available.
    pub components: Option<Vec<Arc<dyn LipschitzMonotone>>>,
}

impl fmt::Debug for InclusionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InclusionProblem")
            .field("dim", &self.dim())
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("known_zero", &self.known_zero.is_some())
            .finish()
    }
}

impl InclusionProblem {
    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// `‖x̄ − J_{γA}(x̄ − γ B x̄)‖`, zero exactly at solutions.
    pub fn fixed_point_residual(&self, x: &Vector, gamma: f64) -> Result<f64> {
        let bx = self.b.eval(x)?;
        let step = self.a.resolvent(gamma, &(x - bx * gamma))?;
        Ok((x - step).norm())
    }
}

/// Which closed-form inner optimization the duality gap can use.
#[derive(Debug, Clone)]
pub enum SaddleClass {
    /// `G(x, v) = xᵀMv` over a product of simplices.
    Bilinear { payoff: Matrix },
    /// `G(x, v) = xᵀMv − (β/2)‖v‖²` over a product of simplices.
    Smoothed { payoff: Matrix, beta: f64 },
    /// No exact duality gap available.
    General,
}

/// `min_x max_v G(x, v) = h(x) + f(x) + ⟨Kx, v⟩ − g*(v) − ℓ(v)`.
#[derive(Clone)]
pub struct SaddleProblem {
    pub f: Arc<dyn ProxFunction>,
    pub gstar: Arc<dyn ProxFunction>,
    pub k: Arc<dyn LinearMap>,
    pub h: Arc<dyn SmoothFunction>,
    pub l: Arc<dyn SmoothFunction>,
    pub known_saddle: Option<(Vector, Vector)>,
    pub norm_k: f64,
    pub class: SaddleClass,
}

impl fmt::Debug for SaddleProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SaddleProblem")
            .field("primal_dim", &self.primal_dim())
            .field("dual_dim", &self.dual_dim())
            .field("norm_k", &self.norm_k)
            .field("class", &self.class)
            .field("known_saddle", &self.known_saddle)
            .finish()
    }
}

impl SaddleProblem {
    pub fn primal_dim(&self) -> usize {
        self.k.in_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.k.out_dim()
    }

    pub fn mu_h(&self) -> f64 {
        self.h.gradient_lipschitz()
    }

    pub fn mu_l(&self) -> f64 {
        self.l.gradient_lipschitz()
    }

    /// Whether `dom f` and `dom g*` are bounded.
    pub fn domains_bounded(&self) -> bool {
        self.f.domain_radius().is_some() && self.gstar.domain_radius().is_some()
    }
}
