//! The driver loop shared by every solver kind.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ergodic_average, frb_step, rfb_step, spd_step, srfb_step, srpg_step, PrimalDualState, SolverState, Trajectory};
use crate::diagnostics::RunRecord;
use crate::operators::{GradientMap, LipschitzMonotone};
use crate::oracles::NoiseSpec;
use crate::problems::{duality_gap, CompositeProblem, InclusionProblem, SaddleProblem};
use crate::schedules::{
    assess_inclusion, assess_primal_dual, AdmissibilityReport, ConditionCheck, InclusionAdmissibility,
    InclusionConstants, StepSchedule,
};
use crate::{check_dim, Error, Result, Vector};

/// Consecutive sub-tolerance residuals needed to stop early.
pub const STOP_STREAK: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Srfb,
    Rfb,
    Frb,
    Srpg,
    Spd,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Srfb => "srfb",
            SolverKind::Rfb => "rfb",
            SolverKind::Frb => "frb",
            SolverKind::Srpg => "srpg",
            SolverKind::Spd => "spd",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, SolverKind::Rfb | SolverKind::Frb)
    }
}

#[derive(Debug, Clone)]
pub enum RunProblem {
    Inclusion(InclusionProblem),
    Composite(CompositeProblem),
    Saddle(SaddleProblem),
}

impl RunProblem {
    /// The single-operator view, when there is one.
    pub fn inclusion(&self) -> Result<InclusionProblem> {
        match self {
            RunProblem::Inclusion(p) => Ok(p.clone()),
            RunProblem::Composite(c) => c.as_inclusion(),
            RunProblem::Saddle(_) => Err(Error::InvalidParameter("saddle problems run only with spd".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub budget: u64,
    pub record_every: u64,
    /// Stop once `resid < stop_tol` for [`STOP_STREAK`] consecutive steps.
    pub stop_tol: Option<f64>,
    /// Run even if no admissibility condition holds.
    pub force: bool,
    pub record_wall_time: bool,
    /// Keep every iterate (single-operator reflected methods only).
    pub keep_trajectory: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            budget: 0,
            record_every: 1,
            stop_tol: None,
            force: false,
            record_wall_time: false,
            keep_trajectory: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub solver: SolverKind,
    pub problem: &'a RunProblem,
    pub schedule: &'a StepSchedule,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub x0: Option<Vector>,
    pub x_prev: Option<Vector>,
    pub v0: Option<Vector>,
    pub v_prev: Option<Vector>,
    pub settings: RunSettings,
}

/// Which guarantees hold for a run's schedule and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Admissibility {
    Inclusion(InclusionAdmissibility),
    PrimalDual(AdmissibilityReport),
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        match self {
            Admissibility::Inclusion(a) => a.any_passed(),
            Admissibility::PrimalDual(r) => r.passed(),
        }
    }

    pub fn describe_failures(&self) -> String {
        match self {
            Admissibility::Inclusion(a) => a.describe_failures(),
            Admissibility::PrimalDual(r) => r.describe_failures(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Converged { n: u64 },
    /// An iterate or metric stopped being finite at step `n`.
    Diverged { n: u64 },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub termination: Termination,
    pub admissibility: Admissibility,
    pub final_x: Vector,
    pub final_v: Option<Vector>,
    pub trajectory: Option<Trajectory>,
}

/// Evaluates the schedule and noise against the problem's constants.
pub fn admissibility(spec: &RunSpec) -> Result<Admissibility> {
    spec.schedule.validate()?;
    let variance = spec.noise.variance_profile();
    match (spec.solver, spec.problem) {
        (SolverKind::Spd, RunProblem::Saddle(p)) => {
            let mut report = assess_primal_dual(
                spec.schedule,
                p.mu_h(),
                p.mu_l(),
                p.norm_k,
                variance.as_ref(),
                variance.as_ref(),
            );
            report.checks.push(if p.domains_bounded() {
                ConditionCheck::pass("bounded domains", "dom f and dom g* are bounded")
            } else {
                ConditionCheck::fail("bounded domains", "dom f or dom g* is unbounded")
            });
            Ok(Admissibility::PrimalDual(report))
        }
        (SolverKind::Spd, _) => Err(Error::InvalidParameter("spd needs a saddle problem".into())),
        (kind, problem) => {
            if kind.is_deterministic() && !spec.noise.is_exact() {
                return Err(Error::InvalidParameter(format!("{} is deterministic; noise must be exact", kind.name())));
            }
            let p = problem.inclusion()?;
            let constants = InclusionConstants {
                mu: p.mu,
                nu_a: p.nu,
                nu_b: p.b.strong_monotonicity(),
                domain_bounded: p.a.domain_bound().is_some(),
            };
            Ok(Admissibility::Inclusion(assess_inclusion(spec.schedule, constants, variance.as_ref())))
        }
    }
}

/// Drives one seeded run to its budget, the stop rule or divergence.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    let verdict = admissibility(spec)?;
    if !verdict.passed() && !spec.settings.force {
        return Err(Error::Inadmissible(verdict.describe_failures()));
    }
    if spec.settings.record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    if let Some(tol) = spec.settings.stop_tol {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("stop tolerance must be positive, got {tol}")));
        }
    }
    match spec.problem {
        RunProblem::Saddle(p) => run_primal_dual(spec, p, verdict),
        _ => run_inclusion(spec, verdict),
    }
}

/// Bookkeeping shared by both loops.
struct Recorder {
    records: Vec<RunRecord>,
    clock: Option<Instant>,
    streak: u32,
    every: u64,
    budget: u64,
    stop_tol: Option<f64>,
}

enum Step {
    Continue,
    Stop(Termination),
}

impl Recorder {
    fn new(settings: &RunSettings) -> Self {
        Recorder {
            records: Vec::new(),
            clock: settings.record_wall_time.then(Instant::now),
            streak: 0,
            every: settings.record_every,
            budget: settings.budget,
            stop_tol: settings.stop_tol,
        }
    }

    /// Registers the state after step `n`; `metrics` is evaluated only on
    /// recorded steps.
    fn observe(&mut self, n: u64, resid: f64, metrics: impl FnOnce() -> Result<RunRecord>) -> Result<Step> {
        if !resid.is_finite() {
            return Ok(Step::Stop(Termination::Diverged { n }));
        }
        let converged = match self.stop_tol {
            Some(tol) if resid < tol => {
                self.streak += 1;
                self.streak >= STOP_STREAK
            }
            _ => {
                self.streak = 0;
                false
            }
        };
        if n.is_multiple_of(self.every) || n == self.budget || converged {
            let mut rec = metrics()?;
            rec.wall_ns = self.clock.map(|t| t.elapsed().as_nanos() as u64);
            let finite = [rec.dist_sq, rec.draw_err_sq, rec.ergodic_gap].iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Ok(Step::Stop(Termination::Diverged { n }));
            }
            self.records.push(rec);
        }
        Ok(if converged { Step::Stop(Termination::Converged { n }) } else { Step::Continue })
    }
}

fn initial_pair(x0: &Option<Vector>, x_prev: &Option<Vector>, dim: usize) -> Result<(Vector, Option<Vector>)> {
    let x0 = x0.clone().unwrap_or_else(|| Vector::zeros(dim));
    check_dim(dim, x0.len())?;
    if let Some(p) = x_prev {
        check_dim(dim, p.len())?;
    }
    Ok((x0, x_prev.clone()))
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

fn run_inclusion(spec: &RunSpec, admissibility: Admissibility) -> Result<RunOutcome> {
    let p = spec.problem.inclusion()?;
    let (x0, x_prev) = initial_pair(&spec.x0, &spec.x_prev, p.dim())?;
    let composite_f = match (spec.solver, spec.problem) {
        (SolverKind::Srpg, RunProblem::Composite(c)) => Some(c.f.clone()),
        (SolverKind::Srpg, _) => {
            return Err(Error::InvalidParameter("srpg needs a composite problem".into()));
        }
        _ => None,
    };
    let mut oracle = spec.noise.build(p.b.clone(), p.components.as_deref(), spec.seed, 0)?;
    let mut state = SolverState::start(x0, x_prev, p.b.as_ref())?;
    let reflected = spec.solver != SolverKind::Frb;
    let exact = oracle.is_exact() || spec.solver == SolverKind::Rfb;
    let mut trajectory = (spec.settings.keep_trajectory && reflected).then(|| Trajectory::start(&state, exact));

    let mut rec = Recorder::new(&spec.settings);
    let mut termination = Termination::Budget;
    for k in 0..spec.settings.budget {
        let gamma = spec.schedule.gamma(k);
        let y = reflected.then(|| state.reflected());
        let next = match spec.solver {
            SolverKind::Srfb => srfb_step(&state, p.a.as_ref(), &mut oracle, gamma),
            SolverKind::Rfb => rfb_step(&state, p.a.as_ref(), p.b.as_ref(), gamma),
            SolverKind::Frb => frb_step(&state, p.a.as_ref(), p.b.as_ref(), gamma),
            SolverKind::Srpg => srpg_step(&state, composite_f.as_deref().expect("checked above"), &mut oracle, gamma),
            SolverKind::Spd => unreachable!("dispatched to the primal-dual loop"),
        };
        let next = match next {
            Ok(s) => s,
            Err(e) if is_divergence(&e) => {
                termination = Termination::Diverged { n: k + 1 };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(t) = trajectory.as_mut() {
            t.push(&next, gamma);
        }
        let n = k + 1;
        let resid = (&next.x_curr - &next.x_prev).norm();
        let step = rec.observe(n, resid, || {
            let draw_err_sq = match &y {
                None => None,
                Some(_) if exact => Some(0.0),
                Some(y) => Some((&next.last_draw - p.b.eval(y)?).norm_squared()),
            };
            Ok(RunRecord {
                n,
                gamma,
                dist_sq: p.known_zero.as_ref().map(|z| (&next.x_curr - z).norm_squared()),
                resid,
                draw_err_sq,
                ergodic_gap: None,
                wall_ns: None,
            })
        })?;
        state = next;
        if let Step::Stop(t) = step {
            termination = t;
            break;
        }
    }
    Ok(RunOutcome {
        records: rec.records,
        termination,
        admissibility,
        final_x: state.x_curr,
        final_v: None,
        trajectory,
    })
}

fn run_primal_dual(spec: &RunSpec, p: &SaddleProblem, admissibility: Admissibility) -> Result<RunOutcome> {
    if spec.solver != SolverKind::Spd {
        return Err(Error::InvalidParameter(format!("{} cannot run a saddle problem", spec.solver.name())));
    }
    let (x0, x_prev) = initial_pair(&spec.x0, &spec.x_prev, p.primal_dim())?;
    let (v0, v_prev) = initial_pair(&spec.v0, &spec.v_prev, p.dual_dim())?;
    let grad_h: Arc<dyn LipschitzMonotone> = Arc::new(GradientMap(p.h.clone()));
    let grad_l: Arc<dyn LipschitzMonotone> = Arc::new(GradientMap(p.l.clone()));
    let mut h_oracle = spec.noise.build(grad_h.clone(), None, spec.seed, 0)?;
    let mut l_oracle = spec.noise.build(grad_l.clone(), None, spec.seed, 1)?;
    let exact = spec.noise.is_exact();
    let mut state = PrimalDualState::new(
        SolverState::start(x0, x_prev, grad_h.as_ref())?,
        SolverState::start(v0, v_prev, grad_l.as_ref())?,
    );

    let mut rec = Recorder::new(&spec.settings);
    let mut termination = Termination::Budget;
    for k in 0..spec.settings.budget {
        let gamma = spec.schedule.gamma(k);
        let (y, u) = (state.primal.reflected(), state.dual.reflected());
        let next = match spd_step(
            &state,
            p.f.as_ref(),
            p.gstar.as_ref(),
            p.k.as_ref(),
            &mut h_oracle,
            &mut l_oracle,
            gamma,
        ) {
            Ok(s) => s,
            Err(e) if is_divergence(&e) => {
                termination = Termination::Diverged { n: k + 1 };
                break;
            }
            Err(e) => return Err(e),
        };
        let n = k + 1;
        let resid = ((&next.primal.x_curr - &next.primal.x_prev).norm_squared()
            + (&next.dual.x_curr - &next.dual.x_prev).norm_squared())
        .sqrt();
        let step = rec.observe(n, resid, || {
            let draw_err_sq = if exact {
                0.0
            } else {
                (&next.primal.last_draw - grad_h.eval(&y)?).norm_squared()
                    + (&next.dual.last_draw - grad_l.eval(&u)?).norm_squared()
            };
            let (xa, va) = ergodic_average(&next)?;
            let ergodic_gap = match duality_gap(p, &xa, &va) {
                Ok(g) => Some(g),
                Err(Error::NotComputable(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(RunRecord {
                n,
                gamma,
                dist_sq: p.known_saddle.as_ref().map(|(xs, vs)| {
                    (&next.primal.x_curr - xs).norm_squared() + (&next.dual.x_curr - vs).norm_squared()
                }),
                resid,
                draw_err_sq: Some(draw_err_sq),
                ergodic_gap,
                wall_ns: None,
            })
        })?;
        state = next;
        if let Step::Stop(t) = step {
            termination = t;
            break;
        }
    }
    Ok(RunOutcome {
        records: rec.records,
        termination,
        admissibility,
        final_x: state.primal.x_curr,
        final_v: Some(state.dual.x_curr),
        trajectory: None,
    })
}
