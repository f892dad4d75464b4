//! Closed-form equilibria of the free and constant-dose systems, with
//! eigenvalues, stability verdicts, and the evaluated stability inequalities.
//!
//! The free system has exactly three fixed points: the origin, `(k_a, 0)`,
//! and `(0, k_b)`. Under a constant dose the boundary points shift inward
//! with the dose, and at one particular dose the two nullclines coincide and
//! an entire line segment of fixed points appears.

use serde::Serialize;
use thiserror::Error;

use crate::model::{rhs_controlled, Efficacy, Jacobian, Phenotype, State};

/// Eigenvalue magnitudes below this count as zero for the verdict.
pub const EIG_TOL: f64 = 1e-9;

// Dose-matching tolerance for recognizing the degenerate control value.
const DEGENERATE_MATCH: f64 = 1e-12;

/// Stability classification of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
    LineDegenerate,
}

/// Eigenvalues of a real 2x2 matrix: either two reals or a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Eigenvalues {
    Real(f64, f64),
    Complex { re: f64, im: f64 },
}

impl Eigenvalues {
    /// Real parts, in stored order.
    pub fn real_parts(&self) -> (f64, f64) {
        match *self {
            Eigenvalues::Real(a, b) => (a, b),
            Eigenvalues::Complex { re, .. } => (re, re),
        }
    }

    /// Real parts sorted ascending, for order-insensitive comparisons.
    pub fn sorted_real_parts(&self) -> (f64, f64) {
        let (a, b) = self.real_parts();
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// One evaluated stability inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    /// The inequality, written out.
    pub expr: String,
    /// Evaluated left-hand side.
    pub lhs: f64,
    /// Evaluated right-hand side.
    pub rhs: f64,
    /// Whether the inequality holds.
    pub holds: bool,
}

impl Condition {
    fn less(expr: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            expr: expr.into(),
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }
}

/// Either an isolated fixed point or the degenerate line `v_a + v_b = c`
/// described by its two axis intercepts (the slope is always -1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EquilibriumPoint {
    Point(State),
    Line {
        v_a_intercept: f64,
        v_b_intercept: f64,
    },
}

/// Full classification record for one equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub point: EquilibriumPoint,
    pub eigenvalues: Eigenvalues,
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
    /// False when the point has a non-positive coordinate and therefore
    /// lies outside the biological domain; it is still reported so the
    /// algebra remains checkable.
    pub biological: bool,
}

/// Serialize reports as a JSON document.
pub fn reports_to_json(reports: &[EquilibriumReport]) -> String {
    serde_json::to_string_pretty(reports).expect("equilibrium reports serialize")
}

fn verdict_for(re1: f64, re2: f64) -> Verdict {
    if re1 < -EIG_TOL && re2 < -EIG_TOL {
        Verdict::Stable
    } else if re1 > EIG_TOL || re2 > EIG_TOL {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    }
}

/// Closed-form eigenvalues of a real 2x2 matrix via trace and determinant;
/// triangular matrices short-circuit to their diagonal so those eigenvalues
/// are exact. Complex pairs are classified by their real part.
pub fn classify_stability(j: Jacobian) -> (Eigenvalues, Verdict) {
    if j[1][0] == 0.0 || j[0][1] == 0.0 {
        let (a, b) = (j[0][0], j[1][1]);
        return (Eigenvalues::Real(a, b), verdict_for(a, b));
    }
    let half_trace = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        let (a, b) = (half_trace + root, half_trace - root);
        (Eigenvalues::Real(a, b), verdict_for(a, b))
    } else {
        let im = (-disc).sqrt();
        (
            Eigenvalues::Complex { re: half_trace, im },
            verdict_for(half_trace, half_trace),
        )
    }
}

/// The three equilibria of the free system with their closed-form
/// eigenvalues. Under `k_a < k_b` the verdict pattern is always
/// (unstable, unstable, stable).
pub fn equilibria_free(p: &Phenotype) -> Vec<EquilibriumReport> {
    let origin = EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: 0.0, v_b: 0.0 }),
        eigenvalues: Eigenvalues::Real(p.r_a, p.r_b),
        verdict: verdict_for(p.r_a, p.r_b),
        conditions: vec![
            Condition::less("0 < r_A", 0.0, p.r_a),
            Condition::less("0 < r_B", 0.0, p.r_b),
        ],
        biological: true,
    };

    let lam2_a = p.r_b * (p.k_b - p.k_a) / p.k_b;
    let capacity_a = EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: p.k_a, v_b: 0.0 }),
        eigenvalues: Eigenvalues::Real(-p.r_a, lam2_a),
        verdict: verdict_for(-p.r_a, lam2_a),
        conditions: vec![
            Condition::less("-r_A < 0", -p.r_a, 0.0),
            Condition::less("0 < r_B(k_B - k_A)/k_B", 0.0, lam2_a),
        ],
        biological: true,
    };

    let lam2_b = p.r_a * (p.k_a - p.k_b) / p.k_a;
    let capacity_b = EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: 0.0, v_b: p.k_b }),
        eigenvalues: Eigenvalues::Real(-p.r_b, lam2_b),
        verdict: verdict_for(-p.r_b, lam2_b),
        conditions: vec![
            Condition::less("-r_B < 0", -p.r_b, 0.0),
            Condition::less("r_A(k_A - k_B)/k_A < 0", lam2_b, 0.0),
        ],
        biological: true,
    };

    vec![origin, capacity_a, capacity_b]
}

/// Why no degenerate dose exists for a parameter set.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoDegenerateControl {
    #[error("the two nullclines are parallel for every dose (denominator vanished)")]
    ParallelNullclines,
    #[error("the coincidence dose {u} lies outside (0, 1]")]
    OutOfRange { u: f64 },
}

/// The dose at which both nullclines collapse onto the same line, i.e. the
/// solution of `k_a (1 - c_a u / r_a) = k_b (1 - c_b u / r_b)`, returned
/// only when it lies in `(0, 1]`.
pub fn degenerate_control(p: &Phenotype, e: &Efficacy) -> Result<f64, NoDegenerateControl> {
    let numerator = p.k_b - p.k_a;
    let denominator = p.k_b * e.c_b / p.r_b - p.k_a * e.c_a / p.r_a;
    let scale = (p.k_b * e.c_b / p.r_b).abs() + (p.k_a * e.c_a / p.r_a).abs();
    if denominator.abs() <= 1e-14 * scale.max(1.0) {
        return Err(NoDegenerateControl::ParallelNullclines);
    }
    let u = numerator / denominator;
    if u.is_finite() && 0.0 < u && u <= 1.0 {
        Ok(u)
    } else {
        Err(NoDegenerateControl::OutOfRange { u })
    }
}

/// Shared nullcline intercept at the degenerate dose: `v_a + v_b = S`.
pub fn degenerate_line_sum(p: &Phenotype, e: &Efficacy, u: f64) -> f64 {
    p.k_a - p.k_a * e.c_a / p.r_a * u
}

/// Equilibria of the constant-dose system.
///
/// Boundary points with non-positive coordinates are reported with
/// `biological: false` rather than suppressed. When the dose matches the
/// degenerate value the interior line of fixed points is appended; its
/// eigenvalues come from the Jacobian (evaluated at the segment midpoint):
/// zero along the line and a negative transversal value, so the line
/// attracts transversally even though each point on it is only neutrally
/// stable.
pub fn equilibria_constant_control(
    p: &Phenotype,
    e: &Efficacy,
    u: f64,
) -> Vec<EquilibriumReport> {
    assert!((0.0..=1.0).contains(&u), "dose {u} outside [0, 1]");
    let mut reports = Vec::with_capacity(4);

    // origin
    let (l1, l2) = (p.r_a - e.c_a * u, p.r_b - e.c_b * u);
    let dose_floor = if e.c_b > 0.0 {
        (p.r_a / e.c_a).max(p.r_b / e.c_b)
    } else {
        f64::INFINITY
    };
    reports.push(EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: 0.0, v_b: 0.0 }),
        eigenvalues: Eigenvalues::Real(l1, l2),
        verdict: verdict_for(l1, l2),
        conditions: vec![Condition::less(
            "max(r_A/c_A, r_B/c_B) < u",
            dose_floor,
            u,
        )],
        biological: true,
    });

    // boundary point on the A axis
    let v_a_star = -p.k_a * (e.c_a * u - p.r_a) / p.r_a;
    let l1 = e.c_a * u - p.r_a;
    let l2 = p.r_b * (1.0 + p.k_a / (p.r_a * p.k_b) * (e.c_a * u - p.r_a)) - e.c_b * u;
    reports.push(EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: v_a_star, v_b: 0.0 }),
        eigenvalues: Eigenvalues::Real(l1, l2),
        verdict: verdict_for(l1, l2),
        conditions: vec![
            Condition::less(
                "r_B(1 - k_A/k_B) < (c_B - r_B k_A c_A / (r_A k_B)) u",
                p.r_b * (1.0 - p.k_a / p.k_b),
                (e.c_b - p.r_b * p.k_a * e.c_a / (p.r_a * p.k_b)) * u,
            ),
            Condition::less("u < r_A/c_A", u, p.r_a / e.c_a),
        ],
        biological: v_a_star > 0.0,
    });

    // boundary point on the B axis
    let v_b_star = -p.k_b * (e.c_b * u - p.r_b) / p.r_b;
    let l1 = p.r_a * (1.0 + p.k_b / (p.r_b * p.k_a) * (e.c_b * u - p.r_b)) - e.c_a * u;
    let l2 = e.c_b * u - p.r_b;
    reports.push(EquilibriumReport {
        point: EquilibriumPoint::Point(State { v_a: 0.0, v_b: v_b_star }),
        eigenvalues: Eigenvalues::Real(l1, l2),
        verdict: verdict_for(l1, l2),
        conditions: vec![
            Condition::less(
                "r_A(1 - k_B/k_A) < (c_A - r_A k_B c_B / (r_B k_A)) u",
                p.r_a * (1.0 - p.k_b / p.k_a),
                (e.c_a - p.r_a * p.k_b * e.c_b / (p.r_b * p.k_a)) * u,
            ),
            Condition {
                expr: "u < r_B/c_B".into(),
                lhs: u,
                rhs: if e.c_b > 0.0 { p.r_b / e.c_b } else { f64::MAX },
                holds: e.c_b == 0.0 || u < p.r_b / e.c_b,
            },
        ],
        biological: v_b_star > 0.0,
    });

    // interior line, only at the coincidence dose
    if let Ok(u_deg) = degenerate_control(p, e) {
        if (u - u_deg).abs() <= DEGENERATE_MATCH * u_deg.abs().max(1.0) {
            let sum = degenerate_line_sum(p, e, u);
            // rank-1 Jacobian on the line: one zero eigenvalue along it and
            // -(r_A/k_A V_A + r_B/k_B V_B) across it; quote the midpoint
            let mid = 0.5 * sum;
            let transversal = -(p.r_a / p.k_a * mid + p.r_b / p.k_b * mid);
            reports.push(EquilibriumReport {
                point: EquilibriumPoint::Line {
                    v_a_intercept: sum,
                    v_b_intercept: sum,
                },
                eigenvalues: Eigenvalues::Real(0.0, transversal),
                verdict: Verdict::LineDegenerate,
                conditions: vec![
                    Condition {
                        expr: "k_A(1 - c_A u/r_A) = k_B(1 - c_B u/r_B)".into(),
                        lhs: degenerate_line_sum(p, e, u),
                        rhs: p.k_b - p.k_b * e.c_b / p.r_b * u,
                        holds: true,
                    },
                    Condition::less(
                        "transversal eigenvalue -(r_A/k_A V_A + r_B/k_B V_B) < 0",
                        transversal,
                        0.0,
                    ),
                ],
                biological: sum > 0.0,
            });
        }
    }

    reports
}

/// Residual of the constant-dose field at a reported point (max over the
/// line's biological segment for line reports).
pub fn equilibrium_residual(
    p: &Phenotype,
    e: &Efficacy,
    u: f64,
    report: &EquilibriumReport,
) -> f64 {
    let norm = |s: State| {
        let d = rhs_controlled(p, e, s, u);
        d[0].abs().max(d[1].abs())
    };
    match report.point {
        EquilibriumPoint::Point(s) => {
            if s.v_a >= 0.0 && s.v_b >= 0.0 {
                norm(s)
            } else {
                // outside the validated domain; evaluate the field directly
                let total = s.v_a + s.v_b;
                let d = [
                    p.r_a * (1.0 - total / p.k_a) * s.v_a - e.c_a * u * s.v_a,
                    p.r_b * (1.0 - total / p.k_b) * s.v_b - e.c_b * u * s.v_b,
                ];
                d[0].abs().max(d[1].abs())
            }
        }
        EquilibriumPoint::Line { v_a_intercept, .. } => (0..=8)
            .map(|i| {
                let v_a = v_a_intercept * i as f64 / 8.0;
                norm(State {
                    v_a,
                    v_b: v_a_intercept - v_a,
                })
            })
            .fold(0.0, f64::max),
    }
}
