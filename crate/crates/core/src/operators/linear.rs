use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{check_dim, check_finite, Error, Matrix, Result, Vector};

/// A bounded linear map `K: R^n → R^m` with its adjoint.
pub trait LinearMap: Send + Sync + Debug {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply_unchecked(&self, x: &Vector) -> Vector;
    fn adjoint_unchecked(&self, v: &Vector) -> Vector;

    /// A known value of `‖K‖`, returned as-is by [`estimate_operator_norm`].
    fn norm_hint(&self) -> Option<f64> {
        None
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.in_dim(), x.len())?;
        check_finite("linear map argument", x)?;
        Ok(self.apply_unchecked(x))
    }

    fn adjoint(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.out_dim(), v.len())?;
        check_finite("adjoint argument", v)?;
        Ok(self.adjoint_unchecked(v))
    }
}

#[derive(Debug, Clone)]
pub struct DenseLinearMap {
    matrix: Matrix,
    norm_hint: Option<f64>,
}

impl DenseLinearMap {
    pub fn new(matrix: Matrix) -> Self {
        DenseLinearMap { matrix, norm_hint: None }
    }

    pub fn with_norm_hint(mut self, norm: f64) -> Self {
        self.norm_hint = Some(norm);
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl LinearMap for DenseLinearMap {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_unchecked(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }

    fn adjoint_unchecked(&self, v: &Vector) -> Vector {
        self.matrix.tr_mul(v)
    }

    fn norm_hint(&self) -> Option<f64> {
        self.norm_hint
    }
}

const POWER_ITERATION_SEED: u64 = 0x5eed_0f4b;

/// Estimates `‖K‖` by power iteration on `K*K`.
///
/// The start vector is drawn from a fixed-seed stream, so the estimate is
/// deterministic. Iteration stops once successive estimates agree to relative
/// tolerance `tol`; otherwise the best estimate is returned inside the error.
pub fn estimate_operator_norm(k: &dyn LinearMap, tol: f64, max_iter: usize) -> Result<f64> {
    if let Some(norm) = k.norm_hint() {
        return Ok(norm);
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter("power iteration needs tol > 0 and max_iter >= 1".into()));
    }
    let n = k.in_dim();
    if n == 0 || k.out_dim() == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let kv = k.apply_unchecked(&v);
        let current = kv.norm();
        let w = k.adjoint_unchecked(&kv);
        let wn = w.norm();
        if current == 0.0 || wn == 0.0 {
            return Ok(0.0);
        }
        if it > 1 && (current - estimate).abs() <= tol * current {
            return Ok(current);
        }
        estimate = current;
        v = w / wn;
    }
    Err(Error::NormNotConverged { estimate, iterations: max_iter })
}
