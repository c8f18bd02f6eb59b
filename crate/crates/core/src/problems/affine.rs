use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::InclusionProblem;
use crate::operators::{estimate_operator_norm, AffineMap, LipschitzMonotone, DenseLinearMap, SquaredNorm, Subdifferential};
use crate::{Error, Matrix, Result, Vector};

const NORM_TOL: f64 = 1e-13;
const NORM_MAX_ITER: usize = 200_000;

/// `A = ν·Id`, `B(x) = Sx + b` with `S` skew-symmetric.
///
/// The zero `x̄ = −(νI + S)⁻¹ b` comes from a dense LU solve and `μ = ‖S‖`
/// from power iteration.
pub fn affine_inclusion(nu: f64, skew: Matrix, offset: Vector) -> Result<InclusionProblem> {
    monotone_affine_inclusion(nu, skew, None, offset)
}

/// As [`affine_inclusion`] with `B(x) = (S + P)x + b` for a symmetric positive
/// semidefinite `P`; `μ` is then the largest singular value of `S + P`.
pub fn monotone_affine_inclusion(nu: f64, skew: Matrix, psd: Option<Matrix>, offset: Vector) -> Result<InclusionProblem> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be nonnegative, got {nu}")));
    }
    let d = offset.len();
    let b = AffineMap::new(Some(skew.clone()), psd.clone(), offset.clone())?;
    let mu = match psd {
        None => estimate_operator_norm(&DenseLinearMap::new(skew.clone()), NORM_TOL, NORM_MAX_ITER)?,
        Some(_) => b.lipschitz(),
    };

    let system = Matrix::identity(d, d) * nu + b.matrix();
    let rhs = -&offset;
    let zero = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("nu*I + S is singular".into()))?;
    let residual = (&system * &zero - &rhs).norm();
    if !zero.iter().all(|v| v.is_finite()) || residual > 1e-9 * (1.0 + offset.norm()) {
        return Err(Error::Singular(format!("nu*I + S is numerically singular (residual {residual:e})")));
    }

    Ok(InclusionProblem {
        a: Arc::new(Subdifferential::new(SquaredNorm::new(nu))),
        b: Arc::new(b),
        known_zero: Some(zero),
        mu,
        nu,
        components: None,
    })
}

/// Random affine inclusion of dimension `dim`.
///
/// `S = (G − Gᵀ)/2` for a Gaussian matrix `G`, rescaled so that `‖S‖ = skew_scale`;
/// `b` is standard Gaussian. Everything is drawn from `seed`.
pub fn make_affine_inclusion(dim: usize, nu: f64, skew_scale: f64, seed: u64) -> Result<InclusionProblem> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(skew_scale >= 0.0 && skew_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("skew scale must be nonnegative, got {skew_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let mut skew = (&g - g.transpose()) * 0.5;
    let raw = estimate_operator_norm(&DenseLinearMap::new(skew.clone()), NORM_TOL, NORM_MAX_ITER)?;
    if raw > 0.0 {
        skew *= skew_scale / raw;
    } else {
        skew.fill(0.0);
    }
    let offset = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    affine_inclusion(nu, skew, offset)
}
