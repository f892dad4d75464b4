//! Built-in verification suite: nine numbered checks covering the
//! closed-form equilibrium algebra, the qualitative attractor behavior, the
//! integrator convergence orders, the adjoint gradient against finite
//! differences, and both dose-scheduling solvers. The `verify` command and
//! the acceptance test target both run these.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};

use crate::equilibria::{
    degenerate_control, degenerate_line_sum, equilibria_constant_control, equilibria_free,
    Eigenvalues, Verdict,
};
use crate::integrate::{
    integrate, integrate_constant, integrate_free, empirical_order, OrderScenario, StepMethod,
    TimeGrid,
};
use crate::model::{rhs_controlled, State};
use crate::ocp::{adjoint_sweep, gradient, solve_fbsm, solve_penalty, SolveReport};
use crate::scenario::{fixtures, parse_scenario, Scenario};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub runtime: Duration,
}

impl CriterionResult {
    /// One `PASS`/`FAIL` line for terminal output.
    pub fn line(&self) -> String {
        format!(
            "{} criterion {}: {} — {} [{:.3}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.runtime.as_secs_f64()
        )
    }
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ]
}

struct Check {
    passed: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        if !ok {
            self.passed = false;
            self.notes.push(format!("FAILED: {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn finish(
        self,
        id: usize,
        name: &'static str,
        started: Instant,
        limit: Option<Duration>,
    ) -> CriterionResult {
        let runtime = started.elapsed();
        let mut passed = self.passed;
        let mut notes = self.notes;
        if let Some(limit) = limit {
            if runtime > limit {
                passed = false;
                notes.push(format!(
                    "FAILED: runtime {:.3}s exceeds {:.3}s",
                    runtime.as_secs_f64(),
                    limit.as_secs_f64()
                ));
            }
        }
        CriterionResult {
            id,
            name,
            passed,
            detail: notes.join("; "),
            runtime,
        }
    }
}

fn fig1() -> Scenario {
    parse_scenario(fixtures::FIG1).expect("fig1 fixture parses")
}

fn fig3() -> Scenario {
    parse_scenario(fixtures::FIG3).expect("fig3 fixture parses")
}

fn fig4() -> Scenario {
    parse_scenario(fixtures::FIG4).expect("fig4 fixture parses")
}

fn fig6() -> Scenario {
    parse_scenario(fixtures::FIG6).expect("fig6 fixture parses")
}

/// Closed-form eigenvalue table of the free system, exact to 1e-12.
pub fn criterion_1() -> CriterionResult {
    let sc = fig1();
    let started = Instant::now();
    let reports = equilibria_free(&sc.phenotype);
    let mut check = Check::new();
    let expected = [
        ((3.0, 1.0), Verdict::Unstable),
        ((-3.0, 1.0 / 6.0), Verdict::Unstable),
        ((-1.0, -3.0 / 5.0), Verdict::Stable),
    ];
    check.require(reports.len() == 3, format!("{} equilibria", reports.len()));
    for (r, ((e1, e2), verdict)) in reports.iter().zip(expected) {
        let Eigenvalues::Real(a, b) = r.eigenvalues else {
            check.require(false, "complex eigenvalues at a table point");
            continue;
        };
        check.require(
            (a - e1).abs() <= 1e-12 && (b - e2).abs() <= 1e-12,
            format!("eigenvalues ({a:.7}, {b:.7}) vs ({e1:.7}, {e2:.7})"),
        );
        check.require(r.verdict == verdict, format!("verdict {:?}", r.verdict));
    }
    check.finish(
        1,
        "free-system eigenvalue table (exact)",
        started,
        Some(Duration::from_millis(1)),
    )
}

/// Every fixture seed reaches the mutant-capacity attractor by t = 20.
pub fn criterion_2() -> CriterionResult {
    let sc = fig1();
    let started = Instant::now();
    let mut check = Check::new();
    let target = State { v_a: 0.0, v_b: 12.0 };
    check.require(sc.initial.len() == 5, format!("{} seeds", sc.initial.len()));
    for seed in &sc.initial {
        match integrate_free(StepMethod::Rk4, &sc.phenotype, &sc.grid, *seed, &sc.cost) {
            Ok(traj) => {
                let d = traj.final_state().distance(&target);
                check.require(
                    d <= 1e-3,
                    format!("seed ({}, {}) dist {d:.2e}", seed.v_a, seed.v_b),
                );
            }
            Err(e) => check.require(false, format!("seed {seed:?}: {e}")),
        }
    }
    check.finish(
        2,
        "free-system attractor from every seed",
        started,
        Some(Duration::from_secs(1)),
    )
}

/// Constant dosing inverts the competition: all fixture seeds settle on the
/// boundary point, whose eigenvalues match the closed forms.
pub fn criterion_3() -> CriterionResult {
    let sc = fig3();
    let started = Instant::now();
    let mut check = Check::new();
    let u = sc.constant_u.expect("constant-u fixture");
    let e = sc.efficacy.expect("treated fixture");
    let target = State { v_a: 7.800709, v_b: 0.0 };
    for seed in &sc.initial {
        check.require(seed.v_a > 0.0, format!("seed v_a {} > 0", seed.v_a));
        match integrate_constant(StepMethod::Rk4, &sc.phenotype, &e, u, &sc.grid, *seed, &sc.cost)
        {
            Ok(traj) => {
                let d = traj.final_state().distance(&target);
                check.require(
                    d <= 1e-2,
                    format!("seed ({}, {}) dist {d:.2e}", seed.v_a, seed.v_b),
                );
            }
            Err(err) => check.require(false, format!("seed {seed:?}: {err}")),
        }
    }
    let reports = equilibria_constant_control(&sc.phenotype, &e, u);
    let Eigenvalues::Real(l1, l2) = reports[1].eigenvalues else {
        panic!("boundary point has real eigenvalues")
    };
    check.require(
        (l1 - (-2.3402127)).abs() <= 1e-6 && (l2 - (-0.0166076)).abs() <= 1e-6,
        format!("boundary eigenvalues ({l1:.7}, {l2:.7})"),
    );
    check.require(
        reports[1].verdict == Verdict::Stable,
        "boundary point stable",
    );
    check.finish(3, "constant-dose inversion", started, None)
}

/// The nullcline-coincidence dose is 2/3 for the fixture parameters, and at
/// that dose a one-dimensional set of states is stationary.
pub fn criterion_4() -> CriterionResult {
    let sc = fig3();
    let started = Instant::now();
    let mut check = Check::new();
    let e = sc.efficacy.expect("treated fixture");
    match degenerate_control(&sc.phenotype, &e) {
        Ok(u) => {
            check.require(
                (u - 2.0 / 3.0).abs() <= 1e-12,
                format!("coincidence dose {u:.15}"),
            );
            let sum = degenerate_line_sum(&sc.phenotype, &e, u);
            let worst = (0..=100)
                .map(|i| {
                    let v_a = sum * i as f64 / 100.0;
                    let d = rhs_controlled(
                        &sc.phenotype,
                        &e,
                        State { v_a, v_b: sum - v_a },
                        u,
                    );
                    d[0].abs().max(d[1].abs())
                })
                .fold(0.0, f64::max);
            check.require(
                worst < 1e-10,
                format!("max field residual on the line {worst:.2e}"),
            );
        }
        Err(err) => check.require(false, format!("no coincidence dose: {err}")),
    }
    check.finish(4, "degenerate dose and line of equilibria", started, None)
}

/// Observed convergence orders 1/1/2/4, and the implicit stepper completes
/// a coarse-step run without a Newton failure.
pub fn criterion_5() -> CriterionResult {
    let sc = fig1();
    let started = Instant::now();
    let mut check = Check::new();
    let probe = OrderScenario {
        phenotype: sc.phenotype,
        efficacy: crate::model::Efficacy { c_a: 1.0, c_b: 0.0 },
        u: 0.0,
        init: State { v_a: 1.0, v_b: 1.0 },
        t0: 0.0,
        tf: 20.0,
        dts: vec![0.2, 0.1, 0.05],
    };
    let expected = [
        (StepMethod::ExplicitEuler, 1.0),
        (StepMethod::ImplicitEuler, 1.0),
        (StepMethod::Trapezoidal, 2.0),
        (StepMethod::Rk4, 4.0),
    ];
    for (method, order) in expected {
        match empirical_order(method, &probe) {
            Ok(got) => check.require(
                (got - order).abs() <= 0.3,
                format!("{method} order {got:.3}"),
            ),
            Err(e) => check.require(false, format!("{method}: {e}")),
        }
    }
    let coarse = TimeGrid::new(0.0, 20.0, 0.5).unwrap();
    match integrate_free(
        StepMethod::ImplicitEuler,
        &sc.phenotype,
        &coarse,
        State { v_a: 1.0, v_b: 1.0 },
        &sc.cost,
    ) {
        Ok(_) => check.require(true, "implicit Euler completes at dt=0.5"),
        Err(e) => check.require(false, format!("implicit Euler at dt=0.5: {e}")),
    }
    check.finish(
        5,
        "integrator convergence orders",
        started,
        Some(Duration::from_secs(10)),
    )
}

/// Adjoint gradient vs central finite differences on random schedules.
pub fn criterion_6() -> CriterionResult {
    let sc = fig4();
    let started = Instant::now();
    let mut check = Check::new();
    let e = sc.efficacy.expect("treated fixture");
    let init = sc.initial[0];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let eval = |values: &[f64]| {
        let traj = integrate(StepMethod::Rk4, &sc.phenotype, &e, values, &sc.grid, init, &sc.cost)
            .expect("feasible schedule integrates");
        traj.final_cost() + values.iter().map(|u| u * u).sum::<f64>() * sc.grid.dt()
    };
    for _ in 0..10 {
        // interior draws keep the finite-difference probes feasible
        let values: Vec<f64> = (0..sc.grid.steps())
            .map(|_| rng.gen_range(0.02..0.98))
            .collect();
        let traj =
            integrate(StepMethod::Rk4, &sc.phenotype, &e, &values, &sc.grid, init, &sc.cost)
                .expect("schedule integrates");
        let adj = adjoint_sweep(&sc.phenotype, &e, &sc.cost, &traj).expect("sweep");
        let g = gradient(&sc.phenotype, &e, &sc.cost, &traj, &adj).expect("gradient");
        for i in 0..values.len() {
            let eps = 1e-6;
            let mut up = values.clone();
            up[i] += eps;
            let mut dn = values.clone();
            dn[i] -= eps;
            let fd = (eval(&up) - eval(&dn)) / (2.0 * eps);
            worst = worst.max((g[i] - fd).abs() / fd.abs().max(1e-10));
        }
    }
    check.require(
        worst <= 1e-4,
        format!("worst component-wise relative gap {worst:.2e} over 10 schedules"),
    );
    check.finish(
        6,
        "adjoint gradient vs finite differences",
        started,
        Some(Duration::from_secs(30)),
    )
}

fn solve_fig4() -> (Scenario, SolveReport) {
    let sc = fig4();
    let e = sc.efficacy.expect("treated fixture");
    let report = solve_fbsm(
        &sc.phenotype,
        &e,
        &sc.cost,
        &sc.grid,
        sc.initial[0],
        sc.solver.u_max,
        &sc.solver.solve_options(),
    )
    .expect("fig4 solve");
    (sc, report)
}

/// The unconstrained schedule solve: converged, monotone, and the original
/// strain never falls behind the mutant; removing treatment lets the mutant
/// grow back.
pub fn criterion_7() -> CriterionResult {
    let started = Instant::now();
    let (sc, report) = solve_fig4();
    let mut check = Check::new();
    check.require(
        report.converged && report.iterations <= 500,
        format!("converged in {} iterations", report.iterations),
    );
    let monotone = report
        .objectives
        .windows(2)
        .all(|pair| pair[1] <= pair[0] + 1e-12);
    check.require(monotone, "objective sequence non-increasing");
    let min_gap = report
        .trajectory
        .states
        .iter()
        .map(|a| a.state.v_a - a.state.v_b)
        .fold(f64::INFINITY, f64::min);
    check.require(min_gap >= 0.0, format!("min(V_A - V_B) = {min_gap:.3e}"));

    let e = sc.efficacy.unwrap();
    let tail_grid = TimeGrid::new(sc.grid.tf(), sc.grid.tf() + 20.0, sc.grid.dt()).unwrap();
    let tail = integrate(
        StepMethod::Rk4,
        &sc.phenotype,
        &e,
        &vec![0.0; tail_grid.steps()],
        &tail_grid,
        report.trajectory.final_state(),
        &sc.cost,
    )
    .expect("tail integrates");
    let growing = tail
        .states
        .windows(2)
        .all(|pair| pair[1].state.v_b > pair[0].state.v_b);
    check.require(growing, "mutant grows on the zero-dose window");
    check.finish(
        7,
        "optimal schedule keeps the original strain ahead",
        started,
        Some(Duration::from_secs(60)),
    )
}

/// The penalty path holds the mutant below the bound, tightening round over
/// round, and an inactive bound reproduces the unconstrained solve.
pub fn criterion_8() -> CriterionResult {
    let sc = fig6();
    let started = Instant::now();
    let mut check = Check::new();
    let e = sc.efficacy.expect("treated fixture");
    let xi = sc.solver.xi.expect("ocp-wsc fixture");
    let popts = sc.solver.penalty_options();
    match solve_penalty(
        &sc.phenotype,
        &e,
        &sc.cost,
        &sc.grid,
        sc.initial[0],
        sc.solver.u_max,
        xi,
        &popts,
    ) {
        Ok(report) => {
            check.require(
                report.constraint_met && report.constraint_violation <= 1e-3 * xi,
                format!("violation {:.2e} <= {:.2e}", report.constraint_violation, 1e-3 * xi),
            );
            let monotone = report
                .penalty_rounds
                .windows(2)
                .all(|pair| pair[1].constraint_violation <= pair[0].constraint_violation + 1e-12);
            check.require(
                monotone,
                format!("violation non-increasing over {} rounds", report.penalty_rounds.len()),
            );
        }
        Err(err) => check.require(false, format!("penalty solve failed: {err}")),
    }

    // a slack bound reproduces the unconstrained solution
    let plain = solve_fbsm(
        &sc.phenotype,
        &e,
        &sc.cost,
        &sc.grid,
        sc.initial[0],
        sc.solver.u_max,
        &popts.inner,
    )
    .expect("plain solve");
    match solve_penalty(
        &sc.phenotype,
        &e,
        &sc.cost,
        &sc.grid,
        sc.initial[0],
        sc.solver.u_max,
        15.0,
        &popts,
    ) {
        Ok(relaxed) => check.require(
            (relaxed.objective - plain.objective).abs() <= 1e-3,
            format!(
                "slack-bound objective {:.6} vs plain {:.6}",
                relaxed.objective, plain.objective
            ),
        ),
        Err(err) => check.require(false, format!("slack-bound solve failed: {err}")),
    }
    check.finish(
        8,
        "penalty path holds the mutant bound",
        started,
        Some(Duration::from_secs(120)),
    )
}

/// Discrete first-order optimality pattern at the converged schedule.
pub fn criterion_9() -> CriterionResult {
    let started = Instant::now();
    let (sc, report) = solve_fig4();
    let mut check = Check::new();
    let e = sc.efficacy.unwrap();
    let adj = adjoint_sweep(&sc.phenotype, &e, &sc.cost, &report.trajectory).expect("sweep");
    let g = gradient(&sc.phenotype, &e, &sc.cost, &report.trajectory, &adj).expect("gradient");
    let tol = sc.solver.tolerance;
    let u_max = report.schedule.u_max;
    let bound_tol = 10.0 * tol * u_max;
    let mut violations = Vec::new();
    for (i, (&u, &gi)) in report.schedule.values.iter().zip(&g).enumerate() {
        let interior = gi.abs() < 10.0 * tol;
        let at_lower = u <= bound_tol && gi > 0.0;
        let at_upper = u >= u_max - bound_tol && gi < 0.0;
        if !(interior || at_lower || at_upper) {
            violations.push(format!("interval {i}: u={u:.6}, g={gi:.3e}"));
        }
    }
    check.require(
        violations.is_empty(),
        if violations.is_empty() {
            format!("all {} intervals satisfy the pattern", g.len())
        } else {
            violations.join("; ")
        },
    );
    check.finish(9, "first-order optimality pattern", started, None)
}
