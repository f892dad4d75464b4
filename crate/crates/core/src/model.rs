//! Two-strain competition dynamics under antiviral treatment.
//!
//! Strain A is the original lineage, strain B the better-adapted mutant
//! (larger competition rate, weaker treatment response). All quantities are
//! dimensionless: no time or density units are prescribed anywhere, so the
//! model treats both as pure numbers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First derivative of the two viral densities.
pub type StateDerivative = [f64; 2];

/// 2x2 Jacobian of the dynamics with respect to `(v_a, v_b)`.
pub type Jacobian = [[f64; 2]; 2];

/// Validation failures for model parameters and states.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be strictly positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("k_a must be < k_b (got k_a={k_a}, k_b={k_b})")]
    CompetitionOrder { k_a: f64, k_b: f64 },
    #[error("efficacies must satisfy 0 <= c_b < c_a <= 1 (got c_a={c_a}, c_b={c_b})")]
    EfficacyOrder { c_a: f64, c_b: f64 },
    #[error("{name} must be a finite number (got {value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("viral density {name} must be non-negative (got {value})")]
    NegativeDensity { name: &'static str, value: f64 },
    #[error("penalty weight must be non-negative (got {value})")]
    NegativePenalty { value: f64 },
}

fn require_finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { name, value })
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    require_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

/// Growth and competition parameters of the two strains.
///
/// The standing ordering assumption `k_a < k_b` makes strain B the strain
/// that wins free competition; every stability result downstream relies on
/// it, so violating it is a validation error rather than a silent accept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    /// Reproduction rate of strain A.
    pub r_a: f64,
    /// Reproduction rate of strain B.
    pub r_b: f64,
    /// Competition rate of strain A.
    pub k_a: f64,
    /// Competition rate of strain B.
    pub k_b: f64,
}

impl Phenotype {
    pub fn new(r_a: f64, r_b: f64, k_a: f64, k_b: f64) -> Result<Self, ModelError> {
        let p = Self { r_a, r_b, k_a, k_b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("r_a", self.r_a)?;
        require_positive("r_b", self.r_b)?;
        require_positive("k_a", self.k_a)?;
        require_positive("k_b", self.k_b)?;
        if self.k_a >= self.k_b {
            return Err(ModelError::CompetitionOrder {
                k_a: self.k_a,
                k_b: self.k_b,
            });
        }
        Ok(())
    }
}

/// Treatment efficacy against each strain, `0 <= c_b < c_a <= 1`.
///
/// The treatment is tuned to the original lineage, so it acts more strongly
/// on strain A than on the mutant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficacy {
    /// Efficacy against strain A.
    pub c_a: f64,
    /// Efficacy against strain B.
    pub c_b: f64,
}

impl Efficacy {
    pub fn new(c_a: f64, c_b: f64) -> Result<Self, ModelError> {
        let e = Self { c_a, c_b };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require_finite("c_a", self.c_a)?;
        require_finite("c_b", self.c_b)?;
        if !(0.0 <= self.c_b && self.c_b < self.c_a && self.c_a <= 1.0) {
            return Err(ModelError::EfficacyOrder {
                c_a: self.c_a,
                c_b: self.c_b,
            });
        }
        Ok(())
    }
}

/// Viral densities of the two strains. Only the closed non-negative quadrant
/// is biologically meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub v_a: f64,
    pub v_b: f64,
}

impl State {
    pub fn new(v_a: f64, v_b: f64) -> Result<Self, ModelError> {
        let s = Self { v_a, v_b };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require_finite("v_a", self.v_a)?;
        require_finite("v_b", self.v_b)?;
        if self.v_a < 0.0 {
            return Err(ModelError::NegativeDensity {
                name: "v_a",
                value: self.v_a,
            });
        }
        if self.v_b < 0.0 {
            return Err(ModelError::NegativeDensity {
                name: "v_b",
                value: self.v_b,
            });
        }
        Ok(())
    }

    /// Max-norm distance to another state.
    pub fn distance(&self, other: &State) -> f64 {
        (self.v_a - other.v_a)
            .abs()
            .max((self.v_b - other.v_b).abs())
    }
}

/// State extended with the accumulated running cost `v_c`, whose derivative
/// is the state part of the cost integrand (a sum of squares, hence `v_c`
/// never decreases along a trajectory).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub state: State,
    pub v_c: f64,
}

/// Weights of the running cost.
///
/// `target_a` defaults to `k_a` but is stored explicitly so the cost carries
/// no hidden coupling to [`Phenotype`]. The exterior quadratic penalty on
/// `v_b > penalty_xi` is inactive when `penalty_mu == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Set-point for `v_a`.
    pub target_a: f64,
    /// State bound on `v_b` used by the penalty term.
    pub penalty_xi: f64,
    /// Penalty weight; zero disables the penalty.
    pub penalty_mu: f64,
}

impl CostWeights {
    pub fn new(target_a: f64, penalty_xi: f64, penalty_mu: f64) -> Result<Self, ModelError> {
        let w = Self {
            target_a,
            penalty_xi,
            penalty_mu,
        };
        w.validate()?;
        Ok(w)
    }

    /// Penalty-free weights tracking the set-point `(k_a, 0)`.
    pub fn tracking(p: &Phenotype) -> Self {
        Self {
            target_a: p.k_a,
            penalty_xi: DEFAULT_XI,
            penalty_mu: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require_finite("target_a", self.target_a)?;
        require_positive("penalty_xi", self.penalty_xi)?;
        require_finite("penalty_mu", self.penalty_mu)?;
        if self.penalty_mu < 0.0 {
            return Err(ModelError::NegativePenalty {
                value: self.penalty_mu,
            });
        }
        Ok(())
    }

    pub fn with_penalty(&self, xi: f64, mu: f64) -> Self {
        Self {
            target_a: self.target_a,
            penalty_xi: xi,
            penalty_mu: mu,
        }
    }
}

/// Default state bound for fixtures; the bound is only meant to be "close to
/// zero" relative to the carrying capacities.
pub const DEFAULT_XI: f64 = 0.5;

// Control values may carry a little arithmetic dust from relaxed mixing.
const CONTROL_SLACK: f64 = 1e-9;

/// Free competition dynamics.
pub fn rhs_free(p: &Phenotype, s: State) -> StateDerivative {
    let total = s.v_a + s.v_b;
    [
        p.r_a * (1.0 - total / p.k_a) * s.v_a,
        p.r_b * (1.0 - total / p.k_b) * s.v_b,
    ]
}

/// Treated dynamics: the free field minus the per-capita removal
/// `(c_a u v_a, c_b u v_b)`. With `u == 0` this is bit-identical to
/// [`rhs_free`].
pub fn rhs_controlled(p: &Phenotype, e: &Efficacy, s: State, u: f64) -> StateDerivative {
    assert!(
        (-CONTROL_SLACK..=1.0 + CONTROL_SLACK).contains(&u),
        "control value {u} outside [0, 1]"
    );
    let free = rhs_free(p, s);
    [free[0] - e.c_a * u * s.v_a, free[1] - e.c_b * u * s.v_b]
}

/// Analytic Jacobian of the treated dynamics; `u = 0` gives the free case.
pub fn jacobian(p: &Phenotype, e: &Efficacy, s: State, u: f64) -> Jacobian {
    [
        [
            p.r_a * (1.0 - (2.0 * s.v_a + s.v_b) / p.k_a) - e.c_a * u,
            -p.r_a * s.v_a / p.k_a,
        ],
        [
            -p.r_b * s.v_b / p.k_b,
            p.r_b * (1.0 - (s.v_a + 2.0 * s.v_b) / p.k_b) - e.c_b * u,
        ],
    ]
}

/// Derivative of the treated dynamics with respect to the control.
pub fn rhs_control_derivative(e: &Efficacy, s: State) -> [f64; 2] {
    [-e.c_a * s.v_a, -e.c_b * s.v_b]
}

/// State part of the running cost: squared tracking error plus the exterior
/// penalty when `v_b` exceeds the bound. This is the derivative of `v_c`.
pub fn state_cost_rate(s: State, w: &CostWeights) -> f64 {
    let da = s.v_a - w.target_a;
    let excess = (s.v_b - w.penalty_xi).max(0.0);
    da * da + s.v_b * s.v_b + w.penalty_mu * excess * excess
}

/// Gradient of [`state_cost_rate`] with respect to `(v_a, v_b)`.
pub fn state_cost_gradient(s: State, w: &CostWeights) -> [f64; 2] {
    let excess = (s.v_b - w.penalty_xi).max(0.0);
    [
        2.0 * (s.v_a - w.target_a),
        2.0 * s.v_b + 2.0 * w.penalty_mu * excess,
    ]
}

/// Full running-cost integrand, control effort included.
pub fn cost_integrand(s: State, u: f64, w: &CostWeights) -> f64 {
    state_cost_rate(s, w) + u * u
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig_phenotype() -> Phenotype {
        Phenotype::new(3.0, 1.0, 10.0, 12.0).unwrap()
    }

    fn fig_efficacy() -> Efficacy {
        Efficacy::new(0.9, 0.5).unwrap()
    }

    #[test]
    fn validation_rejects_bad_orderings() {
        assert!(matches!(
            Phenotype::new(3.0, 1.0, 12.0, 10.0),
            Err(ModelError::CompetitionOrder { .. })
        ));
        assert!(matches!(
            Phenotype::new(3.0, 1.0, 10.0, 10.0),
            Err(ModelError::CompetitionOrder { .. })
        ));
        assert!(matches!(
            Phenotype::new(-3.0, 1.0, 10.0, 12.0),
            Err(ModelError::NonPositive { name: "r_a", .. })
        ));
        assert!(matches!(
            Efficacy::new(0.5, 0.9),
            Err(ModelError::EfficacyOrder { .. })
        ));
        assert!(matches!(
            Efficacy::new(1.2, 0.5),
            Err(ModelError::EfficacyOrder { .. })
        ));
        assert!(matches!(
            Efficacy::new(0.9, -0.1),
            Err(ModelError::EfficacyOrder { .. })
        ));
        assert!(State::new(-1.0, 0.0).is_err());
        assert!(CostWeights::new(10.0, 0.0, 0.0).is_err());
        assert!(CostWeights::new(10.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn error_messages_name_the_invariant() {
        let err = Phenotype::new(3.0, 1.0, 12.0, 10.0).unwrap_err();
        assert!(err.to_string().contains("k_a must be < k_b"));
    }

    #[test]
    fn rhs_free_fixed_points_and_hand_value() {
        let p = fig_phenotype();
        assert_eq!(rhs_free(&p, State { v_a: 0.0, v_b: 0.0 }), [0.0, 0.0]);
        assert_eq!(rhs_free(&p, State { v_a: 10.0, v_b: 0.0 }), [0.0, 0.0]);
        assert_eq!(rhs_free(&p, State { v_a: 0.0, v_b: 12.0 }), [0.0, 0.0]);
        // hand substitution at (1, 1): (3 * (1 - 2/10), 1 * (1 - 2/12))
        let d = rhs_free(&p, State { v_a: 1.0, v_b: 1.0 });
        assert!((d[0] - 2.4).abs() < 1e-12);
        assert!((d[1] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_controlled_hand_values() {
        let p = fig_phenotype();
        let e = fig_efficacy();
        let s = State { v_a: 1.0, v_b: 1.0 };
        // u = 0 recovers the free field bit-exactly
        assert_eq!(rhs_controlled(&p, &e, s, 0.0), rhs_free(&p, s));
        // u = 1 subtracts (0.9, 0.5)
        let d = rhs_controlled(&p, &e, s, 1.0);
        assert!((d[0] - 1.5).abs() < 1e-12);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-12);
        // origin is fixed for every dose
        assert_eq!(
            rhs_controlled(&p, &e, State { v_a: 0.0, v_b: 0.0 }, 0.5),
            [0.0, 0.0]
        );
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn rhs_controlled_rejects_out_of_range_control() {
        let p = fig_phenotype();
        let e = fig_efficacy();
        rhs_controlled(&p, &e, State { v_a: 1.0, v_b: 1.0 }, 1.5);
    }

    #[test]
    fn jacobian_at_origin_is_growth_diagonal() {
        let p = fig_phenotype();
        let e = fig_efficacy();
        let j = jacobian(&p, &e, State { v_a: 0.0, v_b: 0.0 }, 0.0);
        assert_eq!(j, [[3.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn jacobian_at_mutant_capacity_is_stable_diagonal() {
        let p = fig_phenotype();
        let e = fig_efficacy();
        let j = jacobian(&p, &e, State { v_a: 0.0, v_b: 12.0 }, 0.0);
        // triangular: eigenvalues are the diagonal, (-0.6, -1)
        assert!((j[0][0] - (-0.6)).abs() < 1e-12);
        assert_eq!(j[1][0], -1.0);
        assert_eq!(j[1][1], -1.0);
        assert_eq!(j[0][1], 0.0);
    }

    fn central_diff_jacobian(p: &Phenotype, e: &Efficacy, s: State, u: f64, h: f64) -> Jacobian {
        let f = |v_a: f64, v_b: f64| rhs_controlled(p, e, State { v_a, v_b }, u);
        let fa_p = f(s.v_a + h, s.v_b);
        let fa_m = f(s.v_a - h, s.v_b);
        let fb_p = f(s.v_a, s.v_b + h);
        let fb_m = f(s.v_a, s.v_b - h);
        [
            [
                (fa_p[0] - fa_m[0]) / (2.0 * h),
                (fb_p[0] - fb_m[0]) / (2.0 * h),
            ],
            [
                (fa_p[1] - fa_m[1]) / (2.0 * h),
                (fb_p[1] - fb_m[1]) / (2.0 * h),
            ],
        ]
    }

    #[test]
    fn jacobian_matches_central_differences_at_probe_point() {
        let p = fig_phenotype();
        let e = fig_efficacy();
        let s = State { v_a: 2.0, v_b: 3.0 };
        let analytic = jacobian(&p, &e, s, 0.4);
        let numeric = central_diff_jacobian(&p, &e, s, 0.4, 1e-6);
        for r in 0..2 {
            for c in 0..2 {
                let scale = analytic[r][c].abs().max(1.0);
                assert!(
                    (analytic[r][c] - numeric[r][c]).abs() / scale < 1e-6,
                    "entry ({r},{c}): {} vs {}",
                    analytic[r][c],
                    numeric[r][c]
                );
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences_randomized() {
        use rand::{Rng, SeedableRng};
        let p = fig_phenotype();
        let e = fig_efficacy();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = State {
                v_a: rng.gen_range(0.0..14.0),
                v_b: rng.gen_range(0.0..14.0),
            };
            let u = rng.gen_range(0.0..1.0);
            let analytic = jacobian(&p, &e, s, u);
            let numeric = central_diff_jacobian(&p, &e, s, u, 1e-6);
            for r in 0..2 {
                for c in 0..2 {
                    let scale = analytic[r][c].abs().max(1.0);
                    assert!(
                        (analytic[r][c] - numeric[r][c]).abs() / scale < 1e-5,
                        "at {s:?} u={u}: entry ({r},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn cost_integrand_examples() {
        let w = CostWeights::new(10.0, 0.5, 0.0).unwrap();
        assert_eq!(cost_integrand(State { v_a: 10.0, v_b: 0.0 }, 0.0, &w), 0.0);
        assert_eq!(
            cost_integrand(State { v_a: 0.0, v_b: 0.0 }, 1.0, &w),
            101.0
        );
        let wp = CostWeights::new(10.0, 0.1, 100.0).unwrap();
        let c = cost_integrand(State { v_a: 10.0, v_b: 0.2 }, 0.0, &wp);
        assert!((c - 1.04).abs() < 1e-12, "penalty arithmetic: {c}");
    }

    #[test]
    fn state_cost_gradient_matches_finite_differences() {
        let w = CostWeights::new(10.0, 0.1, 100.0).unwrap();
        for s in [
            State { v_a: 3.0, v_b: 0.05 },
            State { v_a: 9.0, v_b: 0.3 },
            State { v_a: 11.0, v_b: 2.0 },
        ] {
            let g = state_cost_gradient(s, &w);
            let h = 1e-7;
            let ga = (state_cost_rate(State { v_a: s.v_a + h, ..s }, &w)
                - state_cost_rate(State { v_a: s.v_a - h, ..s }, &w))
                / (2.0 * h);
            let gb = (state_cost_rate(State { v_b: s.v_b + h, ..s }, &w)
                - state_cost_rate(State { v_b: s.v_b - h, ..s }, &w))
                / (2.0 * h);
            assert!((g[0] - ga).abs() < 1e-5, "{:?}", s);
            assert!((g[1] - gb).abs() < 1e-5, "{:?}", s);
        }
    }

    proptest! {
        #[test]
        fn controlled_with_zero_dose_is_free(
            v_a in 0.0..20.0f64,
            v_b in 0.0..20.0f64,
            c_a in 0.011..1.0f64,
            c_b in 0.0..0.01f64,
        ) {
            let p = fig_phenotype();
            let e = Efficacy::new(c_a, c_b).unwrap();
            let s = State { v_a, v_b };
            prop_assert_eq!(rhs_controlled(&p, &e, s, 0.0), rhs_free(&p, s));
        }

        #[test]
        fn axes_are_invariant(v in 0.0..20.0f64, u in 0.0..1.0f64) {
            let p = fig_phenotype();
            let e = fig_efficacy();
            let on_b_axis = rhs_controlled(&p, &e, State { v_a: 0.0, v_b: v }, u);
            prop_assert_eq!(on_b_axis[0], 0.0);
            let on_a_axis = rhs_controlled(&p, &e, State { v_a: v, v_b: 0.0 }, u);
            prop_assert_eq!(on_a_axis[1], 0.0);
        }

        #[test]
        fn field_decays_beyond_larger_capacity(
            v_a in 0.001..30.0f64,
            v_b in 0.001..30.0f64,
        ) {
            let p = fig_phenotype();
            prop_assume!(v_a + v_b > p.k_b);
            let d = rhs_free(&p, State { v_a, v_b });
            prop_assert!(d[0] < 0.0 && d[1] < 0.0);
        }

        #[test]
        fn cost_integrand_non_negative(
            v_a in 0.0..20.0f64,
            v_b in 0.0..20.0f64,
            u in 0.0..1.0f64,
            mu in 0.0..1000.0f64,
        ) {
            let w = CostWeights::new(10.0, 0.5, mu).unwrap();
            let value = cost_integrand(State { v_a, v_b }, u, &w);
            prop_assert!(value >= 0.0);
        }
    }

    #[test]
    fn cost_integrand_zero_only_at_target_rest() {
        let w = CostWeights::new(10.0, 0.5, 100.0).unwrap();
        assert_eq!(cost_integrand(State { v_a: 10.0, v_b: 0.0 }, 0.0, &w), 0.0);
        assert!(cost_integrand(State { v_a: 10.0, v_b: 0.0 }, 0.1, &w) > 0.0);
        assert!(cost_integrand(State { v_a: 9.9, v_b: 0.0 }, 0.0, &w) > 0.0);
        assert!(cost_integrand(State { v_a: 10.0, v_b: 0.1 }, 0.0, &w) > 0.0);
    }
}
