//! Iteration engines.
//!
//! All single-operator methods share [`SolverState`], the rolling pair
//! `(x_n, x_{n−1})` plus the last oracle draw. Each step is a pure function
//! from the old state to the new one; the only side effect is advancing the
//! oracle's random stream.

mod run;

pub use run::{
    admissibility, run, Admissibility, RunOutcome, RunProblem, RunSettings, RunSpec, SolverKind, Termination, STOP_STREAK,
};

use crate::operators::{LinearMap, LipschitzMonotone, ProxFunction, ResolvableOperator};
use crate::oracles::StochasticOracle;
use crate::schedules::StepSchedule;
use crate::{check_dim, check_step, Error, Result, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// `x_n`.
    pub x_curr: Vector,
    /// `x_{n−1}`.
    pub x_prev: Vector,
    pub n: u64,
    /// `r_{n−1}`, the draw that produced `x_n`.
    pub last_draw: Vector,
}

impl SolverState {
    pub fn new(x_curr: Vector, x_prev: Vector, last_draw: Vector) -> Result<Self> {
        check_dim(x_curr.len(), x_prev.len())?;
        check_dim(x_curr.len(), last_draw.len())?;
        Ok(SolverState { x_curr, x_prev, n: 0, last_draw })
    }

    /// Initial state with `x_{−1}` defaulting to `x_0`. The placeholder draw
    /// is `B(x_0)`, evaluated exactly so no randomness is consumed.
    pub fn start(x0: Vector, x_prev: Option<Vector>, b: &dyn LipschitzMonotone) -> Result<Self> {
        let last_draw = b.eval(&x0)?;
        let x_prev = x_prev.unwrap_or_else(|| x0.clone());
        Self::new(x0, x_prev, last_draw)
    }

    pub fn reflected(&self) -> Vector {
        &self.x_curr * 2.0 - &self.x_prev
    }

    fn advance(&self, x_next: Vector, draw: Vector) -> Self {
        SolverState { x_prev: self.x_curr.clone(), x_curr: x_next, n: self.n + 1, last_draw: draw }
    }
}

/// `y = 2·x_curr − x_prev`.
pub fn reflect(x_curr: &Vector, x_prev: &Vector) -> Result<Vector> {
    check_dim(x_curr.len(), x_prev.len())?;
    Ok(x_curr * 2.0 - x_prev)
}

fn backward(a: &dyn ResolvableOperator, state: &SolverState, draw: Vector, gamma: f64) -> Result<SolverState> {
    let z = &state.x_curr - &draw * gamma;
    let x_next = a.resolvent(gamma, &z)?;
    Ok(state.advance(x_next, draw))
}

/// Stochastic reflected forward-backward step:
/// `y_n = 2x_n − x_{n−1}`, `r_n` drawn at `y_n`, `x_{n+1} = J_{γA}(x_n − γ r_n)`.
pub fn srfb_step(
    state: &SolverState,
    a: &dyn ResolvableOperator,
    oracle: &mut StochasticOracle,
    gamma: f64,
) -> Result<SolverState> {
    check_step(gamma)?;
    let y = state.reflected();
    let draw = oracle.draw(state.n, &y)?;
    backward(a, state, draw, gamma)
}

/// Deterministic reflected forward-backward step `x_{n+1} = J_{γA}(x_n − γ B(2x_n − x_{n−1}))`.
pub fn rfb_step(state: &SolverState, a: &dyn ResolvableOperator, b: &dyn LipschitzMonotone, gamma: f64) -> Result<SolverState> {
    check_step(gamma)?;
    let y = state.reflected();
    let draw = b.eval(&y)?;
    backward(a, state, draw, gamma)
}

/// Forward-reflected-backward step `x_{n+1} = J_{γA}(x_n − 2γ B x_n + γ B x_{n−1})`.
///
/// `last_draw` holds the combined forward term `2Bx_n − Bx_{n−1}`.
pub fn frb_step(state: &SolverState, a: &dyn ResolvableOperator, b: &dyn LipschitzMonotone, gamma: f64) -> Result<SolverState> {
    check_step(gamma)?;
    let forward = b.eval(&state.x_curr)? * 2.0 - b.eval(&state.x_prev)?;
    backward(a, state, forward, gamma)
}

/// Stochastic reflected proximal-gradient step
/// `x_{n+1} = prox_{γf}(x_n − γ ∇H(y_n, ξ_n))`.
pub fn srpg_step(
    state: &SolverState,
    f: &dyn ProxFunction,
    grad_oracle: &mut StochasticOracle,
    gamma: f64,
) -> Result<SolverState> {
    check_step(gamma)?;
    let y = state.reflected();
    let draw = grad_oracle.draw(state.n, &y)?;
    let z = &state.x_curr - &draw * gamma;
    let x_next = f.prox(gamma, &z)?;
    Ok(state.advance(x_next, draw))
}

/// Primal and dual iterates plus the step-weighted ergodic sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub primal: SolverState,
    pub dual: SolverState,
    /// `Σ γ_n x_{n+1}`.
    pub ergodic_x: Vector,
    /// `Σ γ_n v_{n+1}`.
    pub ergodic_v: Vector,
    /// `Σ γ_n`.
    pub weight: f64,
}

impl PrimalDualState {
    pub fn new(primal: SolverState, dual: SolverState) -> Self {
        let (m, n) = (primal.x_curr.len(), dual.x_curr.len());
        PrimalDualState { primal, dual, ergodic_x: Vector::zeros(m), ergodic_v: Vector::zeros(n), weight: 0.0 }
    }
}

/// Stochastic primal-dual step with a single shared `γ`:
///
/// ```text
/// y_n = 2x_n − x_{n−1},   u_n = 2v_n − v_{n−1}
/// x_{n+1} = prox_{γf}(x_n − γ ∇H(y_n, ξ_n) − γ K* u_n)
/// v_{n+1} = prox_{γg*}(v_n − γ ∇L(u_n, ζ_n) + γ K y_n)
/// ```
pub fn spd_step(
    state: &PrimalDualState,
    f: &dyn ProxFunction,
    gstar: &dyn ProxFunction,
    k: &dyn LinearMap,
    h_oracle: &mut StochasticOracle,
    l_oracle: &mut StochasticOracle,
    gamma: f64,
) -> Result<PrimalDualState> {
    check_step(gamma)?;
    let (p, d) = (&state.primal, &state.dual);
    let y = p.reflected();
    let u = d.reflected();
    let rh = h_oracle.draw(p.n, &y)?;
    let rl = l_oracle.draw(d.n, &u)?;
    let kt_u = k.adjoint(&u)?;
    let k_y = k.apply(&y)?;

    let x_next = f.prox(gamma, &(&p.x_curr - (&rh + kt_u) * gamma))?;
    let v_next = gstar.prox(gamma, &(&d.x_curr - (&rl - k_y) * gamma))?;

    Ok(PrimalDualState {
        ergodic_x: &state.ergodic_x + &x_next * gamma,
        ergodic_v: &state.ergodic_v + &v_next * gamma,
        weight: state.weight + gamma,
        primal: p.advance(x_next, rh),
        dual: d.advance(v_next, rl),
    })
}

/// `(x̂_N, v̂_N) = (Σ γ_n x_{n+1}, Σ γ_n v_{n+1}) / Σ γ_n`.
pub fn ergodic_average(state: &PrimalDualState) -> Result<(Vector, Vector)> {
    if !(state.weight > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok((&state.ergodic_x / state.weight, &state.ergodic_v / state.weight))
}

/// Full iterate history of a single-operator run, as consumed by the
/// pathwise inequality checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_{−1}, x_0, …, x_N`.
    pub iterates: Vec<Vector>,
    /// `r_0, …, r_{N−1}`.
    pub draws: Vec<Vector>,
    /// `γ_0, …, γ_{N−1}`.
    pub steps: Vec<f64>,
    /// Whether every draw was exact (`r_n = B y_n`).
    pub exact: bool,
}

impl Trajectory {
    pub fn start(state: &SolverState, exact: bool) -> Self {
        Trajectory {
            iterates: vec![state.x_prev.clone(), state.x_curr.clone()],
            draws: Vec::new(),
            steps: Vec::new(),
            exact,
        }
    }

    pub fn push(&mut self, state: &SolverState, gamma: f64) {
        self.iterates.push(state.x_curr.clone());
        self.draws.push(state.last_draw.clone());
        self.steps.push(gamma);
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `x_n` for `n ≥ −1`.
    pub fn x(&self, n: i64) -> &Vector {
        &self.iterates[(n + 1) as usize]
    }

    /// `y_n = 2x_n − x_{n−1}` for `n ≥ 0`; `y_{−1} := x_0`.
    pub fn y(&self, n: i64) -> Vector {
        if n < 0 {
            self.x(0).clone()
        } else {
            self.x(n) * 2.0 - self.x(n - 1)
        }
    }

    /// `γ_n`, with `γ_{−1} := γ_0`.
    pub fn gamma(&self, n: i64) -> f64 {
        self.steps[n.max(0) as usize]
    }
}

/// Runs `steps` stochastic reflected forward-backward iterations and keeps
/// every iterate.
pub fn trace(
    a: &dyn ResolvableOperator,
    oracle: &mut StochasticOracle,
    schedule: &StepSchedule,
    start: SolverState,
    steps: usize,
) -> Result<Trajectory> {
    let mut traj = Trajectory::start(&start, oracle.is_exact());
    let mut state = start;
    for n in 0..steps {
        let gamma = schedule.gamma(n as u64);
        state = srfb_step(&state, a, oracle, gamma)?;
        traj.push(&state, gamma);
    }
    Ok(traj)
}
