//! Step-size sequences `(γ_n)` and validators for their admissibility
//! conditions.
//!
//! The τ-condition refers to `γ_{n−1}` at `n = 0`; we set `γ_{−1} := γ_0`.

use serde::{Deserialize, Serialize};

use crate::oracles::{validate_variance, VarianceCondition, VarianceSchedule};
use crate::{Error, Result, ONE_PLUS_SQRT2, SQRT2_MINUS_ONE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `γ_n = γ`.
    Constant { gamma: f64 },
    /// `γ_n = γ·(1 − (1−c)/(n+1))`: nondecreasing, inside `[cγ, γ]`.
    Band { c: f64, gamma: f64 },
    /// `γ_n = 1/(2ν(n+1))`.
    StronglyMonotone { nu: f64 },
    /// `γ_n = γ₀/(n+1)^p`.
    PowerDecay { gamma0: f64, p: f64 },
    /// Explicit values; the last value is repeated past the end of the table.
    Tabulated { values: Vec<f64> },
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        Self::checked(StepSchedule::Constant { gamma })
    }

    pub fn band(c: f64, gamma: f64) -> Result<Self> {
        Self::checked(StepSchedule::Band { c, gamma })
    }

    pub fn strongly_monotone(nu: f64) -> Result<Self> {
        Self::checked(StepSchedule::StronglyMonotone { nu })
    }

    pub fn power_decay(gamma0: f64, p: f64) -> Result<Self> {
        Self::checked(StepSchedule::PowerDecay { gamma0, p })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Self::checked(StepSchedule::Tabulated { values })
    }

    fn checked(s: Self) -> Result<Self> {
        s.validate()?;
        Ok(s)
    }

    /// Checks that every `γ_n` is positive and finite.
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let ok = match self {
            StepSchedule::Constant { gamma } => positive(*gamma),
            StepSchedule::Band { c, gamma } => positive(*gamma) && *c > 0.0 && *c <= 1.0,
            StepSchedule::StronglyMonotone { nu } => positive(*nu),
            StepSchedule::PowerDecay { gamma0, p } => positive(*gamma0) && p.is_finite(),
            StepSchedule::Tabulated { values } => !values.is_empty() && values.iter().all(|g| positive(*g)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("step schedule {self:?} is not positive")))
        }
    }

    pub fn gamma(&self, n: u64) -> f64 {
        match self {
            StepSchedule::Constant { gamma } => *gamma,
            StepSchedule::Band { c, gamma } => gamma * (1.0 - (1.0 - c) / (n as f64 + 1.0)),
            StepSchedule::StronglyMonotone { nu } => 1.0 / (2.0 * nu * (n as f64 + 1.0)),
            StepSchedule::PowerDecay { gamma0, p } => gamma0 / (n as f64 + 1.0).powf(*p),
            StepSchedule::Tabulated { values } => values[(n as usize).min(values.len() - 1)],
        }
    }

    /// `q` such that `γ_n ≍ (n+1)^{-q}`; `None` without a closed form.
    pub fn decay_exponent(&self) -> Option<f64> {
        match self {
            StepSchedule::Constant { .. } | StepSchedule::Band { .. } => Some(0.0),
            StepSchedule::StronglyMonotone { .. } => Some(1.0),
            StepSchedule::PowerDecay { p, .. } => Some(*p),
            StepSchedule::Tabulated { .. } => None,
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match self {
            StepSchedule::Constant { .. } | StepSchedule::StronglyMonotone { .. } => true,
            StepSchedule::Band { c, .. } => *c == 1.0,
            StepSchedule::PowerDecay { p, .. } => *p >= 0.0,
            StepSchedule::Tabulated { values } => values.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            StepSchedule::Constant { .. } | StepSchedule::Band { .. } => true,
            StepSchedule::StronglyMonotone { .. } => false,
            StepSchedule::PowerDecay { p, .. } => *p <= 0.0,
            StepSchedule::Tabulated { values } => values.windows(2).all(|w| w[1] >= w[0]),
        }
    }

    /// `sup_n γ_n` (possibly infinite).
    pub fn supremum(&self) -> f64 {
        match self {
            StepSchedule::Constant { gamma } | StepSchedule::Band { gamma, .. } => *gamma,
            StepSchedule::StronglyMonotone { nu } => 1.0 / (2.0 * nu),
            StepSchedule::PowerDecay { gamma0, p } => {
                if *p >= 0.0 {
                    *gamma0
                } else {
                    f64::INFINITY
                }
            }
            StepSchedule::Tabulated { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// `τ = inf_n (2/γ_n − 1/γ_{n−1} − μ(1+√2))`.
///
/// Closed-form kinds return the infimum over all `n` (for a band, the worst
/// case over every sequence inside `[cγ, γ]`); tabulated schedules are scanned
/// over `n ∈ [0, horizon]`.
pub fn tau(schedule: &StepSchedule, mu: f64, horizon: u64) -> f64 {
    let drift = mu * ONE_PLUS_SQRT2;
    match schedule {
        StepSchedule::Constant { gamma } => 1.0 / gamma - drift,
        StepSchedule::Band { c, gamma } => 2.0 / gamma - 1.0 / (c * gamma) - drift,
        StepSchedule::StronglyMonotone { nu } => 2.0 * nu - drift,
        StepSchedule::PowerDecay { gamma0, p } if *p >= 0.0 => 1.0 / gamma0 - drift,
        StepSchedule::PowerDecay { p, .. } => {
            // Increasing steps: 2/γ_n − 1/γ_{n−1} → 0 as n → ∞.
            let scanned = scan_tau(schedule, horizon);
            let _ = p;
            scanned.min(0.0) - drift
        }
        StepSchedule::Tabulated { values } => {
            let scanned = scan_tau(schedule, horizon);
            if horizon as usize >= values.len() {
                scanned.min(1.0 / values[values.len() - 1]) - drift
            } else {
                scanned - drift
            }
        }
    }
}

fn scan_tau(schedule: &StepSchedule, horizon: u64) -> f64 {
    let mut prev = schedule.gamma(0);
    let mut best = f64::INFINITY;
    for n in 0..=horizon {
        let g = schedule.gamma(n);
        best = best.min(2.0 / g - 1.0 / prev);
        prev = g;
    }
    best
}

/// `γ_n = 1/(2ν(n+1))`.
pub fn strongly_monotone_gamma(nu: f64, n: u64) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("strong monotonicity modulus must be positive, got {nu}")));
    }
    Ok(1.0 / (2.0 * nu * (n as f64 + 1.0)))
}

/// Smallest integer `n₀ > 4μ(1+√2)/ν`, past which the strongly monotone
/// schedule satisfies `1/(4γ_n) ≥ μ(1+√2)`.
pub fn burn_in_n0(nu: f64, mu: f64) -> u64 {
    assert!(nu > 0.0, "burn-in needs a positive modulus");
    (4.0 * mu * ONE_PLUS_SQRT2 / nu).floor() as u64 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undecidable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub verdict: Verdict,
    pub reason: String,
}

impl ConditionCheck {
    pub fn pass(name: &str, reason: impl Into<String>) -> Self {
        ConditionCheck { name: name.into(), verdict: Verdict::Pass, reason: reason.into() }
    }

    pub fn fail(name: &str, reason: impl Into<String>) -> Self {
        ConditionCheck { name: name.into(), verdict: Verdict::Fail, reason: reason.into() }
    }

    pub fn undecidable(name: &str, reason: impl Into<String>) -> Self {
        ConditionCheck { name: name.into(), verdict: Verdict::Undecidable, reason: reason.into() }
    }

    fn from_bool(name: &str, ok: bool, reason: impl Into<String>) -> Self {
        if ok {
            Self::pass(name, reason)
        } else {
            Self::fail(name, reason)
        }
    }
}

/// A conjunction of conditions; admissible only if every check passes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub checks: Vec<ConditionCheck>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| c.verdict != Verdict::Pass)
    }

    /// One-line description of the conditions that did not pass.
    pub fn describe_failures(&self) -> String {
        self.failures()
            .map(|c| format!("{} ({:?}: {})", c.name, c.verdict, c.reason))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Primal-dual step condition: `(γ_n)` nonincreasing with
/// `sup γ_n < 1/(2μ)`, `μ = 2·max(μ_h, μ_ℓ) + ‖K‖`.
pub fn validate_pd_schedule(schedule: &StepSchedule, mu_h: f64, mu_l: f64, norm_k: f64) -> AdmissibilityReport {
    let mu = 2.0 * mu_h.max(mu_l) + norm_k;
    let bound = if mu > 0.0 { 1.0 / (2.0 * mu) } else { f64::INFINITY };
    let sup = schedule.supremum();
    AdmissibilityReport {
        checks: vec![
            ConditionCheck::from_bool(
                "step nonincreasing",
                schedule.is_nonincreasing(),
                format!("{schedule:?}"),
            ),
            ConditionCheck::from_bool(
                "step below 1/(2mu)",
                sup < bound,
                format!("sup gamma_n = {sup}, 1/(2mu) = {bound} with mu = {mu}"),
            ),
        ],
    }
}

/// Which convergence guarantees of the reflected method a configuration meets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionAdmissibility {
    /// Almost-sure weak convergence: nondecreasing steps below `(√2−1)/μ`,
    /// `τ > 0`, summable variance.
    pub weak_convergence: AdmissibilityReport,
    /// Almost-sure strong convergence: bounded `dom A`, `A` or `B` strongly
    /// monotone, decreasing steps in `ℓ₂ \ ℓ₁` below `(√2−1)/μ`, summable
    /// step-weighted variance.
    pub strong_convergence: AdmissibilityReport,
    /// `E‖x_n − x̄‖² = O(log(n+1)/(n+1))`: `A` `ν`-strongly monotone,
    /// `γ_n = 1/(2ν(n+1))`, bounded variance.
    pub log_rate: AdmissibilityReport,
}

impl InclusionAdmissibility {
    pub fn any_passed(&self) -> bool {
        self.weak_convergence.passed() || self.strong_convergence.passed() || self.log_rate.passed()
    }

    pub fn describe_failures(&self) -> String {
        format!(
            "weak convergence: [{}]; strong convergence: [{}]; log rate: [{}]",
            self.weak_convergence.describe_failures(),
            self.strong_convergence.describe_failures(),
            self.log_rate.describe_failures()
        )
    }
}

/// Structural facts about an inclusion instance needed by the validators.
#[derive(Debug, Clone, Copy)]
pub struct InclusionConstants {
    pub mu: f64,
    pub nu_a: f64,
    pub nu_b: f64,
    pub domain_bounded: bool,
}

/// Horizon used when a τ infimum has to be scanned.
pub const TAU_SCAN_HORIZON: u64 = 100_000;

pub fn assess_inclusion(
    schedule: &StepSchedule,
    constants: InclusionConstants,
    variance: Option<&VarianceSchedule>,
) -> InclusionAdmissibility {
    let InclusionConstants { mu, nu_a, nu_b, domain_bounded } = constants;
    let step_bound = if mu > 0.0 { SQRT2_MINUS_ONE / mu } else { f64::INFINITY };
    let sup = schedule.supremum();
    let below = ConditionCheck::from_bool(
        "step below (sqrt2-1)/mu",
        sup < step_bound,
        format!("sup gamma_n = {sup}, bound = {step_bound}"),
    );

    let t = tau(schedule, mu, TAU_SCAN_HORIZON);
    let weak = AdmissibilityReport {
        checks: vec![
            ConditionCheck::from_bool("step nondecreasing", schedule.is_nondecreasing(), format!("{schedule:?}")),
            below.clone(),
            ConditionCheck::from_bool("tau positive", t > 0.0, format!("tau = {t}")),
            validate_variance(variance, schedule, VarianceCondition::SumFinite),
        ],
    };

    let l2_not_l1 = match schedule.decay_exponent() {
        Some(q) => ConditionCheck::from_bool(
            "steps in l2 but not l1",
            q > 0.5 && q <= 1.0,
            format!("gamma_n decays with exponent {q}"),
        ),
        None => ConditionCheck::undecidable("steps in l2 but not l1", "no closed-form decay"),
    };
    let strong = AdmissibilityReport {
        checks: vec![
            ConditionCheck::from_bool(
                "domain of A bounded",
                domain_bounded,
                if domain_bounded { "A declares a bounded domain" } else { "A declares no domain bound" },
            ),
            ConditionCheck::from_bool(
                "A or B strongly monotone",
                nu_a > 0.0 || nu_b > 0.0,
                format!("nu_A = {nu_a}, nu_B = {nu_b}"),
            ),
            ConditionCheck::from_bool("step decreasing", schedule.is_nonincreasing(), format!("{schedule:?}")),
            below,
            l2_not_l1,
            validate_variance(variance, schedule, VarianceCondition::WeightedSumFinite),
        ],
    };

    let log_rate = match schedule {
        StepSchedule::StronglyMonotone { nu } => AdmissibilityReport {
            checks: vec![ConditionCheck::from_bool(
                    "A strongly monotone with the schedule's modulus",
                    *nu > 0.0 && *nu <= nu_a * (1.0 + 1e-12),
                    format!("schedule nu = {nu}, nu_A = {nu_a}"),
                ),
                validate_variance(variance, schedule, VarianceCondition::Bounded),
            ],
        },
        _ => AdmissibilityReport {
            checks: vec![ConditionCheck::fail(
                "schedule 1/(2nu(n+1))",
                "log-rate guarantee needs the strongly monotone schedule",
            )],
        },
    };

    InclusionAdmissibility { weak_convergence: weak, strong_convergence: strong, log_rate }
}

/// Primal-dual admissibility: the step condition plus summable step-weighted
/// gradient-noise variance for both oracles.
pub fn assess_primal_dual(
    schedule: &StepSchedule,
    mu_h: f64,
    mu_l: f64,
    norm_k: f64,
    variance_h: Option<&VarianceSchedule>,
    variance_l: Option<&VarianceSchedule>,
) -> AdmissibilityReport {
    let mut report = validate_pd_schedule(schedule, mu_h, mu_l, norm_k);
    let mut h = validate_variance(variance_h, schedule, VarianceCondition::WeightedSumFinite);
    h.name = format!("primal {}", h.name);
    let mut l = validate_variance(variance_l, schedule, VarianceCondition::WeightedSumFinite);
    l.name = format!("dual {}", l.name);
    report.checks.push(h);
    report.checks.push(l);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tau_constant_examples() {
        let s = StepSchedule::constant(0.4).unwrap();
        assert_abs_diff_eq!(tau(&s, 1.0, 10), 2.5 - ONE_PLUS_SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(tau(&s, 1.0, 10), 0.085786437626905, epsilon = 1e-12);

        let boundary = StepSchedule::constant(SQRT2_MINUS_ONE).unwrap();
        assert_abs_diff_eq!(tau(&boundary, 1.0, 10), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tau_band_threshold() {
        // Admissible iff c > 1/(2 − γμ(1+√2)) ≈ 0.96682 for γ = 0.4, μ = 1.
        let threshold = 1.0 / (2.0 - 0.4 * ONE_PLUS_SQRT2);
        assert_abs_diff_eq!(threshold, 0.966_823_4, epsilon = 1e-6);
        assert!(tau(&StepSchedule::band(0.9, 0.4).unwrap(), 1.0, 10) < 0.0);
        assert!(tau(&StepSchedule::band(0.95, 0.4).unwrap(), 1.0, 10) < 0.0);
        assert!(tau(&StepSchedule::band(0.97, 0.4).unwrap(), 1.0, 10) > 0.0);
    }

    #[test]
    fn band_stays_inside() {
        let s = StepSchedule::band(0.9, 0.4).unwrap();
        for n in 0..1000 {
            let g = s.gamma(n);
            assert!((0.9 * 0.4 - 1e-15..=0.4).contains(&g));
            assert!(s.gamma(n + 1) >= g);
        }
    }

    #[test]
    fn tau_scanned_matches_closed_form() {
        let s = StepSchedule::strongly_monotone(0.7).unwrap();
        let values: Vec<f64> = (0..200).map(|n| s.gamma(n)).collect();
        let tab = StepSchedule::tabulated(values).unwrap();
        assert_abs_diff_eq!(tau(&tab, 0.3, 150), tau(&s, 0.3, 0), epsilon = 1e-12);
    }

    #[test]
    fn strongly_monotone_examples() {
        assert_eq!(strongly_monotone_gamma(1.0, 0).unwrap(), 0.5);
        assert_abs_diff_eq!(strongly_monotone_gamma(0.5, 9).unwrap(), 0.1, epsilon = 1e-16);
        assert!(strongly_monotone_gamma(0.0, 1).is_err());
        assert!(strongly_monotone_gamma(-1.0, 1).is_err());
        for nu in [0.1, 1.0, 3.5] {
            for n in 0..100 {
                let g = strongly_monotone_gamma(nu, n).unwrap();
                let g1 = strongly_monotone_gamma(nu, n + 1).unwrap();
                assert_abs_diff_eq!(1.0 + 2.0 * nu * g, g / g1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn burn_in_examples() {
        assert_eq!(burn_in_n0(1.0, 1.0), 10);
        assert_eq!(burn_in_n0(1.0, 0.0), 1);
        assert_eq!(burn_in_n0(10.0, 0.1), 1);
    }

    #[test]
    fn pd_schedule_examples() {
        let ok = validate_pd_schedule(&StepSchedule::constant(0.45).unwrap(), 0.0, 0.0, 1.0);
        assert!(ok.passed());
        let boundary = validate_pd_schedule(&StepSchedule::constant(0.5).unwrap(), 0.0, 0.0, 1.0);
        assert!(!boundary.passed());
        let mixed = validate_pd_schedule(&StepSchedule::constant(0.1).unwrap(), 1.0, 0.5, 2.0);
        assert!(mixed.passed());
        assert!(!validate_pd_schedule(&StepSchedule::constant(0.13).unwrap(), 1.0, 0.5, 2.0).passed());
        let increasing = validate_pd_schedule(&StepSchedule::band(0.5, 0.1).unwrap(), 0.0, 0.0, 1.0);
        assert!(!increasing.passed());
    }

    #[test]
    fn assess_reports_each_guarantee() {
        let consts = InclusionConstants { mu: 4.0, nu_a: 1.0, nu_b: 0.0, domain_bounded: false };
        let exact = VarianceSchedule::Constant { c: 0.0 };
        let constant = StepSchedule::constant(0.9 * SQRT2_MINUS_ONE / 4.0).unwrap();
        let a = assess_inclusion(&constant, consts, Some(&exact));
        assert!(a.weak_convergence.passed());
        assert!(!a.strong_convergence.passed());
        assert!(!a.log_rate.passed());

        let sm = StepSchedule::strongly_monotone(1.0).unwrap();
        let noisy = VarianceSchedule::Constant { c: 1.0 };
        let b = assess_inclusion(&sm, consts, Some(&noisy));
        assert!(b.log_rate.passed());
        assert!(!b.weak_convergence.passed());

        let too_big = StepSchedule::constant(1.5 * SQRT2_MINUS_ONE / 4.0).unwrap();
        let c = assess_inclusion(&too_big, consts, Some(&exact));
        assert!(!c.any_passed());
        assert!(c.describe_failures().contains("tau positive"));
    }

    #[test]
    fn rejects_nonpositive_steps() {
        assert!(StepSchedule::constant(0.0).is_err());
        assert!(StepSchedule::band(0.0, 0.1).is_err());
        assert!(StepSchedule::tabulated(vec![]).is_err());
        assert!(StepSchedule::tabulated(vec![0.1, -0.1]).is_err());
    }
}
