//! Stochastic reflected forward-backward splitting for monotone inclusions
//! `0 ∈ (A + B)x`, where `A` is maximal monotone (used through its resolvent)
//! and `B` is monotone and Lipschitz (used through unbiased stochastic
//! estimates).
//!
//! The crate is organised as
//!
//! - [`operators`]: resolvents, proximity operators, Lipschitz monotone maps,
//!   linear maps and operator-norm estimation.
//! - [`oracles`]: unbiased stochastic estimators of `B(y)` and variance
//!   schedules.
//! - [`schedules`]: step-size sequences and their admissibility validators.
//! - [`solvers`]: the reflected forward-backward iteration, its deterministic
//!   baselines, the reflected proximal-gradient specialization and the
//!   primal-dual extension, plus the run loop.
//! - [`problems`]: benchmark instances with certified reference solutions and
//!   the primal-dual gap.
//! - [`diagnostics`]: per-iteration records, pathwise inequality checks and
//!   rate fitting.
//! - [`harness`]: JSON experiment configs, seeded execution, CSV/JSON output.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod operators;
pub mod oracles;
pub mod problems;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};

/// Dense real vector; the working space is `R^d`.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix, stored column-major.
pub type Matrix = nalgebra::DMatrix<f64>;

/// `1 + √2`, the constant that appears in every step-size condition of the
/// reflected method.
pub const ONE_PLUS_SQRT2: f64 = 1.0 + std::f64::consts::SQRT_2;

/// `√2 − 1`; constant steps must satisfy `γ·μ < √2 − 1`.
pub const SQRT2_MINUS_ONE: f64 = std::f64::consts::SQRT_2 - 1.0;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &'static str, x: &Vector) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_step(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step size must be positive and finite, got {gamma}"
        )))
    }
}
