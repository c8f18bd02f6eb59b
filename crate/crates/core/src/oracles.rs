//! Unbiased stochastic estimates `r_n` of `B(y_n)`.
//!
//! Noise is injected only here; the underlying map is always deterministic so
//! diagnostics can measure `‖r_n − B y_n‖²` exactly. Each oracle owns a
//! seeded ChaCha stream, and the only randomness a draw sees is the stream
//! position, which gives independent draws conditional on the past iterates.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::operators::LipschitzMonotone;
use crate::schedules::{ConditionCheck, StepSchedule};
use crate::{check_dim, Error, Result, Vector};

/// Per-iteration bound on `E[‖r_n − B y_n‖² | F_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceSchedule {
    /// `σ_n² = c`.
    Constant { c: f64 },
    /// `σ_n² = c / (n+1)^p`.
    Power { c: f64, p: f64 },
}

impl VarianceSchedule {
    pub fn variance(&self, n: u64) -> f64 {
        match *self {
            VarianceSchedule::Constant { c } => c,
            VarianceSchedule::Power { c, p } => c / ((n + 1) as f64).powf(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, p) = match *self {
            VarianceSchedule::Constant { c } => (c, 0.0),
            VarianceSchedule::Power { c, p } => (c, p),
        };
        if !(c >= 0.0 && c.is_finite() && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("variance schedule {self:?}")));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match *self {
            VarianceSchedule::Constant { c } | VarianceSchedule::Power { c, .. } => c,
        }
    }

    /// Decay exponent `s` with `σ_n² ≍ (n+1)^{-s}`.
    fn exponent(&self) -> f64 {
        match *self {
            VarianceSchedule::Constant { .. } => 0.0,
            VarianceSchedule::Power { p, .. } => p,
        }
    }
}

pub enum NoiseModel {
    /// `r_n = B(y_n)`.
    Exact,
    /// `r_n = B(y_n) + ε`, `ε` isotropic Gaussian with `E‖ε‖² = σ_n²`.
    Gaussian(VarianceSchedule),
    /// `r_n` is the mean of `batch` components drawn uniformly with
    /// replacement; `B` must be the mean of the components.
    Minibatch { components: Vec<Arc<dyn LipschitzMonotone>>, batch: usize },
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Exact => write!(f, "Exact"),
            NoiseModel::Gaussian(s) => write!(f, "Gaussian({s:?})"),
            NoiseModel::Minibatch { components, batch } => {
                write!(f, "Minibatch {{ components: {}, batch: {batch} }}", components.len())
            }
        }
    }
}

#[derive(Debug)]
pub struct StochasticOracle {
    base: Arc<dyn LipschitzMonotone>,
    noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl StochasticOracle {
    /// Noise-free oracle; consumes no randomness.
    pub fn exact(base: Arc<dyn LipschitzMonotone>) -> Self {
        StochasticOracle { base, noise: NoiseModel::Exact, rng: ChaCha8Rng::seed_from_u64(0) }
    }

    /// Oracle drawing from stream `stream` of seed `seed`. Distinct streams of
    /// one seed are independent, which lets a run own several oracles.
    pub fn new(base: Arc<dyn LipschitzMonotone>, noise: NoiseModel, seed: u64, stream: u64) -> Result<Self> {
        match &noise {
            NoiseModel::Exact => {}
            NoiseModel::Gaussian(s) => s.validate()?,
            NoiseModel::Minibatch { components, batch } => {
                if components.is_empty() || *batch == 0 {
                    return Err(Error::InvalidParameter(
                        "minibatch needs at least one component and batch >= 1".into(),
                    ));
                }
                for c in components {
                    check_dim(base.dim(), c.dim())?;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(StochasticOracle { base, noise, rng })
    }

    pub fn base(&self) -> &Arc<dyn LipschitzMonotone> {
        &self.base
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.noise, NoiseModel::Exact)
    }

    /// Closed-form variance bound of the noise model, or `None` when it
    /// depends on the query point (minibatch sampling).
    pub fn variance_profile(&self) -> Option<VarianceSchedule> {
        match &self.noise {
            NoiseModel::Exact => Some(VarianceSchedule::Constant { c: 0.0 }),
            NoiseModel::Gaussian(s) => Some(*s),
            NoiseModel::Minibatch { .. } => None,
        }
    }

    /// Draws `r_n` at `y`.
    pub fn draw(&mut self, n: u64, y: &Vector) -> Result<Vector> {
        let exact = self.base.eval(y)?;
        match &self.noise {
            NoiseModel::Exact => Ok(exact),
            NoiseModel::Gaussian(schedule) => {
                let var = schedule.variance(n);
                if var == 0.0 || y.is_empty() {
                    return Ok(exact);
                }
                let sd = (var / y.len() as f64).sqrt();
                let rng = &mut self.rng;
                Ok(exact.map(|b| b + sd * rng.sample::<f64, _>(StandardNormal)))
            }
            NoiseModel::Minibatch { components, batch } => {
                let mut acc = Vector::zeros(y.len());
                for _ in 0..*batch {
                    let i = self.rng.random_range(0..components.len());
                    acc += components[i].eval_unchecked(y);
                }
                Ok(acc / *batch as f64)
            }
        }
    }
}

/// Serializable description of a noise model, resolved against a problem
/// by [`NoiseSpec::build`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Exact,
    Gaussian { variance: VarianceSchedule },
    Minibatch { batch: usize },
}

impl NoiseSpec {
    pub fn is_exact(&self) -> bool {
        matches!(self, NoiseSpec::Exact)
    }

    /// Closed-form variance bound, as reported by the built oracle.
    pub fn variance_profile(&self) -> Option<VarianceSchedule> {
        match *self {
            NoiseSpec::Exact => Some(VarianceSchedule::Constant { c: 0.0 }),
            NoiseSpec::Gaussian { variance } => Some(variance),
            NoiseSpec::Minibatch { .. } => None,
        }
    }

    pub fn build(
        &self,
        base: Arc<dyn LipschitzMonotone>,
        components: Option<&[Arc<dyn LipschitzMonotone>]>,
        seed: u64,
        stream: u64,
    ) -> Result<StochasticOracle> {
        let noise = match *self {
            NoiseSpec::Exact => return Ok(StochasticOracle::exact(base)),
            NoiseSpec::Gaussian { variance } => NoiseModel::Gaussian(variance),
            NoiseSpec::Minibatch { batch } => {
                let components = components.ok_or_else(|| {
                    Error::InvalidParameter("minibatch noise needs a finite-sum problem".into())
                })?;
                NoiseModel::Minibatch { components: components.to_vec(), batch }
            }
        };
        StochasticOracle::new(base, noise, seed, stream)
    }
}

/// Which variance condition to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceCondition {
    /// `Σ σ_n² < ∞`.
    SumFinite,
    /// `Σ γ_n² σ_n² < ∞`.
    WeightedSumFinite,
    /// `sup σ_n² < ∞`.
    Bounded,
}

/// Decides a variance condition analytically by p-series comparison on the
/// closed forms of the variance and step schedules.
pub fn validate_variance(
    schedule: Option<&VarianceSchedule>,
    step: &StepSchedule,
    condition: VarianceCondition,
) -> ConditionCheck {
    let name = match condition {
        VarianceCondition::SumFinite => "variance summable",
        VarianceCondition::WeightedSumFinite => "step-weighted variance summable",
        VarianceCondition::Bounded => "variance bounded",
    };
    let Some(schedule) = schedule else {
        return ConditionCheck::undecidable(name, "variance has no closed form (depends on the iterates)");
    };
    if schedule.validate().is_err() {
        return ConditionCheck::fail(name, format!("invalid variance schedule {schedule:?}"));
    }
    let s = schedule.exponent();
    if schedule.scale() == 0.0 {
        return ConditionCheck::pass(name, "variance is identically zero");
    }
    match condition {
        VarianceCondition::SumFinite => {
            if s > 1.0 {
                ConditionCheck::pass(name, format!("p-series with exponent {s} > 1 converges"))
            } else {
                ConditionCheck::fail(name, format!("p-series with exponent {s} <= 1 diverges"))
            }
        }
        VarianceCondition::WeightedSumFinite => match step.decay_exponent() {
            None => ConditionCheck::undecidable(name, "step schedule has no closed-form decay"),
            Some(q) => {
                let total = 2.0 * q + s;
                if total > 1.0 {
                    ConditionCheck::pass(name, format!("gamma_n^2 sigma_n^2 decays with exponent {total} > 1"))
                } else {
                    ConditionCheck::fail(name, format!("gamma_n^2 sigma_n^2 decays with exponent {total} <= 1"))
                }
            }
        },
        VarianceCondition::Bounded => {
            if s >= 0.0 {
                ConditionCheck::pass(name, format!("sigma_n^2 <= {}", schedule.scale()))
            } else {
                ConditionCheck::fail(name, format!("sigma_n^2 grows like (n+1)^{}", -s))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{ScaledIdentity, ZeroMap};
    use crate::schedules::Verdict;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn exact_draw_is_base_map() {
        let mut o = StochasticOracle::exact(Arc::new(ScaledIdentity::new(2, 1.0)));
        for n in 0..5 {
            assert_eq!(o.draw(n, &v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0]));
        }
    }

    #[test]
    fn zero_variance_gaussian_matches_exact() {
        let base: Arc<dyn LipschitzMonotone> = Arc::new(ScaledIdentity::new(2, 3.0));
        let mut exact = StochasticOracle::exact(base.clone());
        let mut g = StochasticOracle::new(
            base,
            NoiseModel::Gaussian(VarianceSchedule::Constant { c: 0.0 }),
            9,
            0,
        )
        .unwrap();
        let y = v(&[0.25, -1.5]);
        assert_eq!(g.draw(3, &y).unwrap(), exact.draw(3, &y).unwrap());
    }

    #[test]
    fn minibatch_two_outcomes_mean() {
        // Mean of {2x, 0} is x; each single-sample draw is 2y or 0.
        let comps: Vec<Arc<dyn LipschitzMonotone>> =
            vec![Arc::new(ScaledIdentity::new(1, 2.0)), Arc::new(ZeroMap::new(1))];
        let mut o = StochasticOracle::new(
            Arc::new(ScaledIdentity::new(1, 1.0)),
            NoiseModel::Minibatch { components: comps, batch: 1 },
            42,
            0,
        )
        .unwrap();
        let y = v(&[1.0]);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|k| o.draw(k, &y).unwrap()[0]).collect();
        assert!(draws.iter().all(|d| *d == 2.0 || *d == 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() <= 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn same_seed_same_stream() {
        let make = || {
            StochasticOracle::new(
                Arc::new(ScaledIdentity::new(3, 1.0)),
                NoiseModel::Gaussian(VarianceSchedule::Constant { c: 1.0 }),
                7,
                1,
            )
            .unwrap()
        };
        let (mut a, mut b) = (make(), make());
        let y = v(&[1.0, 2.0, 3.0]);
        for n in 0..50 {
            assert_eq!(a.draw(n, &y).unwrap(), b.draw(n, &y).unwrap());
        }
    }

    #[test]
    fn streams_differ() {
        let make = |stream| {
            StochasticOracle::new(
                Arc::new(ScaledIdentity::new(3, 1.0)),
                NoiseModel::Gaussian(VarianceSchedule::Constant { c: 1.0 }),
                7,
                stream,
            )
            .unwrap()
        };
        let y = v(&[1.0, 2.0, 3.0]);
        assert_ne!(make(0).draw(0, &y).unwrap(), make(1).draw(0, &y).unwrap());
    }

    #[test]
    fn variance_validator_examples() {
        let step = StepSchedule::constant(0.1).unwrap();
        let check = |s: VarianceSchedule, c| validate_variance(Some(&s), &step, c).verdict;
        assert_eq!(check(VarianceSchedule::Power { c: 1.0, p: 2.0 }, VarianceCondition::SumFinite), Verdict::Pass);
        assert_eq!(check(VarianceSchedule::Constant { c: 1.0 }, VarianceCondition::Bounded), Verdict::Pass);
        assert_eq!(check(VarianceSchedule::Power { c: 1.0, p: 1.0 }, VarianceCondition::SumFinite), Verdict::Fail);
        assert_eq!(check(VarianceSchedule::Constant { c: 0.0 }, VarianceCondition::SumFinite), Verdict::Pass);
        assert_eq!(validate_variance(None, &step, VarianceCondition::Bounded).verdict, Verdict::Undecidable);
    }

    #[test]
    fn weighted_sum_uses_step_decay() {
        let sm = StepSchedule::strongly_monotone(1.0).unwrap();
        let c = VarianceSchedule::Constant { c: 1.0 };
        assert_eq!(validate_variance(Some(&c), &sm, VarianceCondition::WeightedSumFinite).verdict, Verdict::Pass);
        let constant = StepSchedule::constant(0.1).unwrap();
        assert_eq!(
            validate_variance(Some(&c), &constant, VarianceCondition::WeightedSumFinite).verdict,
            Verdict::Fail
        );
        let tab = StepSchedule::tabulated(vec![0.1, 0.05]).unwrap();
        assert_eq!(validate_variance(Some(&c), &tab, VarianceCondition::WeightedSumFinite).verdict, Verdict::Undecidable);
    }
}
