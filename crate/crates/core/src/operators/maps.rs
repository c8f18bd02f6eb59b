use std::fmt::Debug;
use std::sync::Arc;

use super::LipschitzMonotone;
use crate::{check_dim, check_finite, Error, Matrix, Result, Vector};

/// `B ≡ 0` on `R^d`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroMap {
    dim: usize,
}

impl ZeroMap {
    pub fn new(dim: usize) -> Self {
        ZeroMap { dim }
    }
}

impl LipschitzMonotone for ZeroMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// `B(x) = s·x` with `s ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    dim: usize,
    scale: f64,
}

impl ScaledIdentity {
    pub fn new(dim: usize, scale: f64) -> Self {
        assert!(scale >= 0.0 && scale.is_finite(), "scale must be nonnegative");
        ScaledIdentity { dim, scale }
    }
}

impl LipschitzMonotone for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, x: &Vector) -> Vector {
        x * self.scale
    }

    fn lipschitz(&self) -> f64 {
        self.scale
    }

    fn strong_monotonicity(&self) -> f64 {
        self.scale
    }
}

/// Affine monotone map `B(x) = (S + P)x + b` with `S` skew-symmetric and `P`
/// symmetric positive semidefinite.
///
/// The skew part makes `B` monotone and Lipschitz without being cocoercive.
#[derive(Debug, Clone)]
pub struct AffineMap {
    matrix: Matrix,
    offset: Vector,
    lipschitz: f64,
    modulus: f64,
}

const STRUCTURE_TOL: f64 = 1e-12;

impl AffineMap {
    /// Builds the map from its skew and positive semidefinite parts.
    pub fn new(skew: Option<Matrix>, psd: Option<Matrix>, offset: Vector) -> Result<Self> {
        let d = offset.len();
        let skew = skew.unwrap_or_else(|| Matrix::zeros(d, d));
        let psd = psd.unwrap_or_else(|| Matrix::zeros(d, d));
        for m in [&skew, &psd] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.nrows().max(m.ncols()) });
            }
        }
        let scale = 1.0 + skew.amax();
        if (&skew + skew.transpose()).amax() > STRUCTURE_TOL * scale {
            return Err(Error::InvalidParameter("skew part is not skew-symmetric".into()));
        }
        let scale = 1.0 + psd.amax();
        if (&psd - psd.transpose()).amax() > STRUCTURE_TOL * scale {
            return Err(Error::InvalidParameter("positive semidefinite part is not symmetric".into()));
        }
        Self::assemble(skew + psd, offset)
    }

    /// Builds the map from a general matrix whose symmetric part is positive semidefinite.
    pub fn from_matrix(matrix: Matrix, offset: Vector) -> Result<Self> {
        if matrix.nrows() != offset.len() || matrix.ncols() != offset.len() {
            return Err(Error::DimensionMismatch { expected: offset.len(), found: matrix.nrows() });
        }
        Self::assemble(matrix, offset)
    }

    fn assemble(matrix: Matrix, offset: Vector) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine matrix"));
        }
        check_finite("affine offset", &offset)?;
        let d = offset.len();
        let (lipschitz, modulus) = if d == 0 {
            (0.0, 0.0)
        } else {
            let sym = (&matrix + matrix.transpose()) * 0.5;
            let min_eig = sym.clone().symmetric_eigenvalues().min();
            if min_eig < -STRUCTURE_TOL * (1.0 + sym.amax()) {
                return Err(Error::InvalidParameter(format!(
                    "map is not monotone: symmetric part has eigenvalue {min_eig}"
                )));
            }
            (matrix.clone().singular_values().max(), min_eig.max(0.0))
        };
        Ok(AffineMap { matrix, offset, lipschitz, modulus })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }
}

impl LipschitzMonotone for AffineMap {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval_unchecked(&self, x: &Vector) -> Vector {
        &self.matrix * x + &self.offset
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_monotonicity(&self) -> f64 {
        self.modulus
    }
}

/// A convex differentiable function with Lipschitz gradient (the `h` and `ℓ`
/// terms of the primal-dual problem).
pub trait SmoothFunction: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn gradient_lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroSmooth {
    dim: usize,
}

impl ZeroSmooth {
    pub fn new(dim: usize) -> Self {
        ZeroSmooth { dim }
    }
}

impl SmoothFunction for ZeroSmooth {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }
    fn gradient_lipschitz(&self) -> f64 {
        0.0
    }
}

/// `(β/2)·‖x‖²`.
#[derive(Debug, Clone, Copy)]
pub struct HalfSquaredNorm {
    dim: usize,
    beta: f64,
}

impl HalfSquaredNorm {
    pub fn new(dim: usize, beta: f64) -> Self {
        HalfSquaredNorm { dim, beta }
    }
}

impl SmoothFunction for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Vector) -> f64 {
        0.5 * self.beta * x.norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        x * self.beta
    }
    fn gradient_lipschitz(&self) -> f64 {
        self.beta
    }
}

/// `h(x) = (1/2m)·‖Ax − y‖²`, the mean of per-row halved squared residuals.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: Matrix,
    targets: Vector,
    gradient: AffineMap,
}

impl LeastSquares {
    pub fn new(design: Matrix, targets: Vector) -> Result<Self> {
        check_dim(design.nrows(), targets.len())?;
        if design.nrows() == 0 {
            return Err(Error::InvalidParameter("design needs at least one row".into()));
        }
        let m = design.nrows() as f64;
        let gram = design.transpose() * &design / m;
        let gram = (&gram + gram.transpose()) * 0.5;
        let offset = -(design.transpose() * &targets) / m;
        let gradient = AffineMap::new(None, Some(gram), offset)?;
        Ok(LeastSquares { design, targets, gradient })
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn targets(&self) -> &Vector {
        &self.targets
    }

    /// `∇h` as an affine monotone map.
    pub fn gradient_map(&self) -> &AffineMap {
        &self.gradient
    }

    /// Per-row gradients `x ↦ a_i(a_iᵀx − y_i)`, whose mean is `∇h`.
    pub fn row_gradients(&self) -> Result<Vec<Arc<dyn LipschitzMonotone>>> {
        (0..self.design.nrows())
            .map(|i| {
                let a = self.design.row(i).transpose();
                let outer = &a * a.transpose();
                let offset = &a * (-self.targets[i]);
                AffineMap::new(None, Some(outer), offset)
                    .map(|m| Arc::new(m) as Arc<dyn LipschitzMonotone>)
            })
            .collect()
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.design.ncols()
    }
    fn eval(&self, x: &Vector) -> f64 {
        (&self.design * x - &self.targets).norm_squared() / (2.0 * self.design.nrows() as f64)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.gradient.eval_unchecked(x)
    }
    fn gradient_lipschitz(&self) -> f64 {
        self.gradient.lipschitz()
    }
}

/// The gradient of a [`SmoothFunction`] viewed as a monotone Lipschitz map.
#[derive(Debug, Clone)]
pub struct GradientMap(pub Arc<dyn SmoothFunction>);

impl LipschitzMonotone for GradientMap {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval_unchecked(&self, x: &Vector) -> Vector {
        self.0.gradient(x)
    }
    fn lipschitz(&self) -> f64 {
        self.0.gradient_lipschitz()
    }
}
