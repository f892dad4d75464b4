//! Fixed-step time integration of the competition dynamics.
//!
//! Four schemes: explicit Euler, implicit Euler, trapezoidal, and classic
//! RK4. The implicit schemes solve their stage equations by Newton iteration
//! with the analytic Jacobian. The running cost `v_c` is accumulated with a
//! quadrature matched to each stepper's order: left endpoint for explicit
//! Euler, trapezoid for the implicit pair, and the Simpson-consistent stage
//! sum for RK4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    rhs_controlled, state_cost_rate, AugmentedState, CostWeights, Efficacy, Jacobian, Phenotype,
    State,
};

/// Newton solve for the implicit stage equations: absolute residual target
/// and iteration cap. The explicit-Euler predictor keeps large-step implicit
/// solves in the convergence basin.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 25;

/// Components in `[-TOLERANCE_NEG, 0)` are clamped to zero and counted;
/// anything lower aborts the march.
pub const TOLERANCE_NEG: f64 = 1e-9;

/// One-step integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMethod {
    ExplicitEuler,
    ImplicitEuler,
    Trapezoidal,
    Rk4,
}

impl StepMethod {
    pub const ALL: [StepMethod; 4] = [
        StepMethod::ExplicitEuler,
        StepMethod::ImplicitEuler,
        StepMethod::Trapezoidal,
        StepMethod::Rk4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StepMethod::ExplicitEuler => "explicit-euler",
            StepMethod::ImplicitEuler => "implicit-euler",
            StepMethod::Trapezoidal => "trapezoidal",
            StepMethod::Rk4 => "rk4",
        }
    }
}

impl std::fmt::Display for StepMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StepMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" | "explicit-euler" => Ok(StepMethod::ExplicitEuler),
            "implicit-euler" => Ok(StepMethod::ImplicitEuler),
            "trapezoid" | "trapezoidal" => Ok(StepMethod::Trapezoidal),
            "rk4" => Ok(StepMethod::Rk4),
            other => Err(format!(
                "unknown method '{other}' (expected euler|implicit-euler|trapezoid|rk4)"
            )),
        }
    }
}

/// Grid construction failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dt must be strictly positive (got {dt})")]
    NonPositiveDt { dt: f64 },
    #[error("t0 must be < tf (got t0={t0}, tf={tf})")]
    EmptySpan { t0: f64, tf: f64 },
    #[error("(tf - t0)/dt = {ratio} is not an integer; the grid must be uniform and exact")]
    NotUniform { ratio: f64 },
}

/// Uniform time grid on `[t0, tf]` with an exact integer number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, dt: f64) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::NonPositiveDt { dt });
        }
        if !(t0.is_finite() && tf.is_finite() && t0 < tf) {
            return Err(GridError::EmptySpan { t0, tf });
        }
        let ratio = (tf - t0) / dt;
        let rounded = ratio.round();
        // allow a few ulps of division round-off, nothing more
        if (ratio - rounded).abs() > 8.0 * f64::EPSILON * ratio.max(1.0) || rounded < 1.0 {
            return Err(GridError::NotUniform { ratio });
        }
        Ok(Self {
            t0,
            tf,
            dt,
            steps: rounded as usize,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of intervals (one less than the number of nodes).
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    /// Time of node `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes()).map(move |i| self.time(i))
    }
}

/// Newton iteration on an implicit stage equation failed to reach tolerance.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
pub struct NewtonDivergence {
    pub iterations: usize,
    pub residual: f64,
}

/// Integration failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step {node}: {source}")]
    Newton {
        node: usize,
        source: NewtonDivergence,
    },
    #[error(
        "step {node} (t={time}): component {component} fell to {value}, below -{limit:e}"
    )]
    NegativeStateOverflow {
        node: usize,
        time: f64,
        component: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("step {node} (t={time}): state is no longer finite")]
    NonFiniteState { node: usize, time: f64 },
    #[error("schedule has {got} values but the grid has {expected} intervals")]
    ScheduleLength { expected: usize, got: usize },
    #[error("control value {value} at interval {index} outside [0, 1]")]
    ControlOutOfRange { index: usize, value: f64 },
}

/// A right-hand side with its analytic Jacobian, as the implicit steppers
/// require. `t` is passed through for systems with time-varying coefficients
/// (the costate sweep); the competition dynamics ignore it.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: [f64; 2]) -> [f64; 2];
    fn jacobian(&self, t: f64, y: [f64; 2]) -> Jacobian;
}

/// Treated competition dynamics under a fixed dose.
pub struct ControlledDynamics<'a> {
    pub phenotype: &'a Phenotype,
    pub efficacy: &'a Efficacy,
    pub u: f64,
}

impl OdeSystem for ControlledDynamics<'_> {
    fn rhs(&self, _t: f64, y: [f64; 2]) -> [f64; 2] {
        rhs_controlled(
            self.phenotype,
            self.efficacy,
            State { v_a: y[0], v_b: y[1] },
            self.u,
        )
    }

    fn jacobian(&self, _t: f64, y: [f64; 2]) -> Jacobian {
        crate::model::jacobian(
            self.phenotype,
            self.efficacy,
            State { v_a: y[0], v_b: y[1] },
            self.u,
        )
    }
}

fn solve_2x2(m: Jacobian, b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Newton solve of `z = base + w * f(t_eval, z)` starting from `guess`.
fn newton_implicit<S: OdeSystem>(
    sys: &S,
    t_eval: f64,
    base: [f64; 2],
    w: f64,
    guess: [f64; 2],
) -> Result<[f64; 2], NewtonDivergence> {
    let mut z = guess;
    let mut residual = f64::INFINITY;
    for iter in 0..NEWTON_MAX_ITER {
        let f = sys.rhs(t_eval, z);
        let g = [z[0] - base[0] - w * f[0], z[1] - base[1] - w * f[1]];
        residual = g[0].abs().max(g[1].abs());
        if residual <= NEWTON_TOLERANCE {
            return Ok(z);
        }
        let j = sys.jacobian(t_eval, z);
        let jg = [
            [1.0 - w * j[0][0], -w * j[0][1]],
            [-w * j[1][0], 1.0 - w * j[1][1]],
        ];
        let Some(delta) = solve_2x2(jg, g) else {
            return Err(NewtonDivergence {
                iterations: iter,
                residual,
            });
        };
        z = [z[0] - delta[0], z[1] - delta[1]];
        if !(z[0].is_finite() && z[1].is_finite()) {
            return Err(NewtonDivergence {
                iterations: iter + 1,
                residual: f64::INFINITY,
            });
        }
    }
    Err(NewtonDivergence {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

/// RK4 stage data, shared by the forward step, the cost quadrature, and the
/// exact gradient sweep (which re-derives the same stages).
pub(crate) struct Rk4Stages {
    pub k1: [f64; 2],
    pub s2: [f64; 2],
    pub k2: [f64; 2],
    pub s3: [f64; 2],
    pub k3: [f64; 2],
    pub s4: [f64; 2],
    pub k4: [f64; 2],
}

pub(crate) fn rk4_stages<S: OdeSystem>(sys: &S, t: f64, y: [f64; 2], dt: f64) -> Rk4Stages {
    let half = 0.5 * dt;
    let k1 = sys.rhs(t, y);
    let s2 = [y[0] + half * k1[0], y[1] + half * k1[1]];
    let k2 = sys.rhs(t + half, s2);
    let s3 = [y[0] + half * k2[0], y[1] + half * k2[1]];
    let k3 = sys.rhs(t + half, s3);
    let s4 = [y[0] + dt * k3[0], y[1] + dt * k3[1]];
    let k4 = sys.rhs(t + dt, s4);
    Rk4Stages {
        k1,
        s2,
        k2,
        s3,
        k3,
        s4,
        k4,
    }
}

/// A single step of the named scheme from `(t, y)` over `dt`.
///
/// Implicit Euler solves `y+ = y + dt f(t+dt, y+)`, the trapezoidal rule
/// solves `y+ = y + dt/2 (f(t, y) + f(t+dt, y+))`, both by Newton iteration
/// seeded with the explicit-Euler predictor. `dt` may be negative for a
/// reverse-time march.
pub fn step<S: OdeSystem>(
    method: StepMethod,
    sys: &S,
    t: f64,
    y: [f64; 2],
    dt: f64,
) -> Result<[f64; 2], NewtonDivergence> {
    match method {
        StepMethod::ExplicitEuler => {
            let f = sys.rhs(t, y);
            Ok([y[0] + dt * f[0], y[1] + dt * f[1]])
        }
        StepMethod::ImplicitEuler => {
            let f0 = sys.rhs(t, y);
            let guess = [y[0] + dt * f0[0], y[1] + dt * f0[1]];
            newton_implicit(sys, t + dt, y, dt, guess)
        }
        StepMethod::Trapezoidal => {
            let f0 = sys.rhs(t, y);
            let guess = [y[0] + dt * f0[0], y[1] + dt * f0[1]];
            let base = [y[0] + 0.5 * dt * f0[0], y[1] + 0.5 * dt * f0[1]];
            newton_implicit(sys, t + dt, base, 0.5 * dt, guess)
        }
        StepMethod::Rk4 => {
            let st = rk4_stages(sys, t, y, dt);
            let sixth = dt / 6.0;
            Ok([
                y[0] + sixth * (st.k1[0] + 2.0 * st.k2[0] + 2.0 * st.k3[0] + st.k4[0]),
                y[1] + sixth * (st.k1[1] + 2.0 * st.k2[1] + 2.0 * st.k3[1] + st.k4[1]),
            ])
        }
    }
}

/// One step plus the matching quadrature increment of `integrand` over the
/// step (used for the running cost).
fn step_with_quadrature<S: OdeSystem>(
    method: StepMethod,
    sys: &S,
    t: f64,
    y: [f64; 2],
    dt: f64,
    integrand: &impl Fn([f64; 2]) -> f64,
) -> Result<([f64; 2], f64), NewtonDivergence> {
    match method {
        StepMethod::ExplicitEuler => {
            let next = step(method, sys, t, y, dt)?;
            Ok((next, dt * integrand(y)))
        }
        StepMethod::ImplicitEuler | StepMethod::Trapezoidal => {
            let next = step(method, sys, t, y, dt)?;
            let inc = 0.5 * dt * (integrand(y) + integrand(next));
            Ok((next, inc))
        }
        StepMethod::Rk4 => {
            let st = rk4_stages(sys, t, y, dt);
            let sixth = dt / 6.0;
            let next = [
                y[0] + sixth * (st.k1[0] + 2.0 * st.k2[0] + 2.0 * st.k3[0] + st.k4[0]),
                y[1] + sixth * (st.k1[1] + 2.0 * st.k2[1] + 2.0 * st.k3[1] + st.k4[1]),
            ];
            let inc = sixth
                * (integrand(y)
                    + 2.0 * integrand(st.s2)
                    + 2.0 * integrand(st.s3)
                    + integrand(st.s4));
            Ok((next, inc))
        }
    }
}

/// Time-stamped solution of one forward march.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// One augmented state per grid node; `v_c` starts at zero.
    pub states: Vec<AugmentedState>,
    /// One control value per grid interval.
    pub controls: Vec<f64>,
    pub method: StepMethod,
    /// Number of state components clamped up from tiny negative overshoot.
    pub clamped: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> State {
        self.states.last().expect("trajectory has nodes").state
    }

    pub fn final_cost(&self) -> f64 {
        self.states.last().expect("trajectory has nodes").v_c
    }

    /// Largest excess of `v_b` above `bound` over all nodes.
    pub fn max_violation(&self, bound: f64) -> f64 {
        self.states
            .iter()
            .map(|a| (a.state.v_b - bound).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// March the treated dynamics over `grid` from `init` under a
/// piecewise-constant schedule (one dose per interval), accumulating the
/// running cost from `w`. `v_c(t0) = 0`.
pub fn integrate(
    method: StepMethod,
    p: &Phenotype,
    e: &Efficacy,
    controls: &[f64],
    grid: &TimeGrid,
    init: State,
    w: &CostWeights,
) -> Result<Trajectory, IntegrateError> {
    if controls.len() != grid.steps() {
        return Err(IntegrateError::ScheduleLength {
            expected: grid.steps(),
            got: controls.len(),
        });
    }
    if let Some((index, &value)) = controls
        .iter()
        .enumerate()
        .find(|(_, &u)| !(-1e-9..=1.0 + 1e-9).contains(&u) || !u.is_finite())
    {
        return Err(IntegrateError::ControlOutOfRange { index, value });
    }

    let mut states = Vec::with_capacity(grid.nodes());
    let mut clamped = 0usize;
    let mut y = [init.v_a, init.v_b];
    let mut v_c = 0.0;
    states.push(AugmentedState {
        state: init,
        v_c,
    });

    let integrand = |v: [f64; 2]| state_cost_rate(State { v_a: v[0], v_b: v[1] }, w);
    for (i, &u) in controls.iter().enumerate() {
        let t = grid.time(i);
        let sys = ControlledDynamics {
            phenotype: p,
            efficacy: e,
            u,
        };
        let (mut next, inc) = step_with_quadrature(method, &sys, t, y, grid.dt(), &integrand)
            .map_err(|source| IntegrateError::Newton { node: i + 1, source })?;
        let t_next = grid.time(i + 1);
        if !(next[0].is_finite() && next[1].is_finite()) {
            return Err(IntegrateError::NonFiniteState {
                node: i + 1,
                time: t_next,
            });
        }
        for (c, name) in [(0usize, "v_a"), (1usize, "v_b")] {
            if next[c] < 0.0 {
                if next[c] >= -TOLERANCE_NEG {
                    next[c] = 0.0;
                    clamped += 1;
                } else {
                    return Err(IntegrateError::NegativeStateOverflow {
                        node: i + 1,
                        time: t_next,
                        component: name,
                        value: next[c],
                        limit: TOLERANCE_NEG,
                    });
                }
            }
        }
        v_c += inc;
        y = next;
        states.push(AugmentedState {
            state: State { v_a: y[0], v_b: y[1] },
            v_c,
        });
    }

    Ok(Trajectory {
        grid: *grid,
        states,
        controls: controls.to_vec(),
        method,
        clamped,
    })
}

/// Convenience wrapper: constant dose on every interval.
pub fn integrate_constant(
    method: StepMethod,
    p: &Phenotype,
    e: &Efficacy,
    u: f64,
    grid: &TimeGrid,
    init: State,
    w: &CostWeights,
) -> Result<Trajectory, IntegrateError> {
    let controls = vec![u; grid.steps()];
    integrate(method, p, e, &controls, grid, init, w)
}

/// Untreated march (`u = 0`); the efficacy constants are irrelevant here.
pub fn integrate_free(
    method: StepMethod,
    p: &Phenotype,
    grid: &TimeGrid,
    init: State,
    w: &CostWeights,
) -> Result<Trajectory, IntegrateError> {
    integrate_constant(method, p, &NO_TREATMENT, 0.0, grid, init, w)
}

// Placeholder efficacy for zero-dose marches; never observable because the
// control multiplies both constants.
pub(crate) const NO_TREATMENT: Efficacy = Efficacy { c_a: 1.0, c_b: 0.0 };

/// Configuration of an empirical convergence-order probe.
#[derive(Debug, Clone)]
pub struct OrderScenario {
    pub phenotype: Phenotype,
    pub efficacy: Efficacy,
    pub u: f64,
    pub init: State,
    pub t0: f64,
    pub tf: f64,
    /// At least three step sizes, largest first, ideally dyadic.
    pub dts: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("need at least 3 step sizes (got {0})")]
    TooFewSteps(usize),
    #[error("errors are at the round-off floor ({smallest:.3e}); refine the probe instead")]
    InsufficientResolution { smallest: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Least-squares slope of `log(endpoint error)` against `log(dt)`, with the
/// reference solution computed by the same method at `min(dt)/64`.
pub fn empirical_order(method: StepMethod, sc: &OrderScenario) -> Result<f64, OrderError> {
    if sc.dts.len() < 3 {
        return Err(OrderError::TooFewSteps(sc.dts.len()));
    }
    let w = CostWeights::tracking(&sc.phenotype);
    let run = |dt: f64| -> Result<State, OrderError> {
        let grid = TimeGrid::new(sc.t0, sc.tf, dt)?;
        let traj = integrate_constant(
            method,
            &sc.phenotype,
            &sc.efficacy,
            sc.u,
            &grid,
            sc.init,
            &w,
        )?;
        Ok(traj.final_state())
    };
    let dt_min = sc.dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference = run(dt_min / 64.0)?;
    let mut log_dt = Vec::with_capacity(sc.dts.len());
    let mut log_err = Vec::with_capacity(sc.dts.len());
    let mut smallest = f64::INFINITY;
    for &dt in &sc.dts {
        let end = run(dt)?;
        let err = end.distance(&reference);
        smallest = smallest.min(err);
        if err < 1e-13 {
            return Err(OrderError::InsufficientResolution { smallest });
        }
        log_dt.push(dt.ln());
        log_err.push(err.ln());
    }
    Ok(least_squares_slope(&log_dt, &log_err))
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
