use std::cmp::Ordering;

use super::ProxFunction;
use crate::{Error, Result, Vector};

/// Slack used by indicator functions when deciding membership, so that
/// prox outputs (feasible up to rounding) evaluate to zero.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFunction;

impl ProxFunction for ZeroFunction {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox_unchecked(&self, _gamma: f64, x: &Vector) -> Vector {
        x.clone()
    }
}

/// `f(x) = w·‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    weight: f64,
}

impl L1Norm {
    pub fn new(weight: f64) -> Self {
        assert!(weight >= 0.0 && weight.is_finite(), "l1 weight must be nonnegative");
        L1Norm { weight }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

impl ProxFunction for L1Norm {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox_unchecked(&self, gamma: f64, x: &Vector) -> Vector {
        let t = gamma * self.weight;
        x.map(|v| soft_threshold(v, t))
    }
}

/// `f(x) = (w/2)·‖x‖²`; its subdifferential is `w·Id`, strongly monotone with modulus `w`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredNorm {
    weight: f64,
}

impl SquaredNorm {
    pub fn new(weight: f64) -> Self {
        assert!(weight >= 0.0 && weight.is_finite(), "quadratic weight must be nonnegative");
        SquaredNorm { weight }
    }
}

impl ProxFunction for SquaredNorm {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.weight * x.norm_squared()
    }

    fn prox_unchecked(&self, gamma: f64, x: &Vector) -> Vector {
        x / (1.0 + gamma * self.weight)
    }

    fn strong_convexity(&self) -> f64 {
        self.weight
    }
}

/// Indicator of the box `[lower, upper]`; its subdifferential is the normal cone.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    lower: Vector,
    upper: Vector,
}

impl BoxIndicator {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        crate::check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box requires lower <= upper".into()));
        }
        Ok(BoxIndicator { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Self::new(Vector::from_element(dim, lower), Vector::from_element(dim, upper))
            .expect("uniform box bounds")
    }
}

impl ProxFunction for BoxIndicator {
    fn dim(&self) -> Option<usize> {
        Some(self.lower.len())
    }

    fn value(&self, x: &Vector) -> f64 {
        let inside = x
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (l, u))| *v >= l - FEASIBILITY_TOL && *v <= u + FEASIBILITY_TOL);
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox_unchecked(&self, _gamma: f64, x: &Vector) -> Vector {
        Vector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(v, (l, u))| v.clamp(*l, *u)),
        )
    }

    fn domain_radius(&self) -> Option<f64> {
        let r2: f64 = self
            .lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum();
        r2.is_finite().then(|| r2.sqrt())
    }
}

/// Indicator of the closed Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone)]
pub struct BallIndicator {
    center: Vector,
    radius: f64,
}

impl BallIndicator {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius}")));
        }
        crate::check_finite("ball center", &center)?;
        Ok(BallIndicator { center, radius })
    }
}

impl ProxFunction for BallIndicator {
    fn dim(&self) -> Option<usize> {
        Some(self.center.len())
    }

    fn value(&self, x: &Vector) -> f64 {
        if (x - &self.center).norm() <= self.radius + FEASIBILITY_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox_unchecked(&self, _gamma: f64, x: &Vector) -> Vector {
        let d = x - &self.center;
        let n = d.norm();
        if n <= self.radius {
            x.clone()
        } else {
            &self.center + d * (self.radius / n)
        }
    }

    fn domain_radius(&self) -> Option<f64> {
        Some(self.center.norm() + self.radius)
    }
}

/// Indicator of the probability simplex `{x ≥ 0, Σx = 1}`.
#[derive(Debug, Clone, Copy)]
pub struct SimplexIndicator {
    dim: usize,
}

impl SimplexIndicator {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "simplex needs at least one vertex");
        SimplexIndicator { dim }
    }
}

impl ProxFunction for SimplexIndicator {
    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn value(&self, x: &Vector) -> f64 {
        let feasible = x.iter().all(|v| *v >= -FEASIBILITY_TOL)
            && (x.sum() - 1.0).abs() <= FEASIBILITY_TOL * (1.0 + x.len() as f64);
        if feasible {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox_unchecked(&self, _gamma: f64, x: &Vector) -> Vector {
        project_simplex(x)
    }

    fn domain_radius(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Euclidean projection onto the probability simplex by sorting.
///
/// Coordinates are sorted in decreasing order with a stable sort, so equal
/// coordinates keep their index order and the output is deterministic.
pub fn project_simplex(x: &Vector) -> Vector {
    let mut sorted: Vec<f64> = x.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    x.map(|v| (v - theta).max(0.0))
}
