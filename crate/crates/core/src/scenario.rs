//! Scenario files: a flat TOML schema describing the parameter set, run
//! mode, grid, seeds, and solver knobs, versioned with a `schema = 1` key.
//!
//! Dotted-key overrides (`grid.dt=0.005`) are applied to the parsed document
//! before validation, so an invalid override fails with a validation error
//! naming the violated invariant rather than producing a half-checked run.

use serde::Deserialize;
use thiserror::Error;

use crate::integrate::{GridError, StepMethod, TimeGrid};
use crate::model::{CostWeights, Efficacy, ModelError, Phenotype, State, DEFAULT_XI};
use crate::ocp::{PenaltyOptions, SolveOptions};
use crate::portrait::PortraitSpec;

pub const SCHEMA_VERSION: i64 = 1;

/// What a scenario asks the tool to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Free,
    ConstantU,
    Ocp,
    OcpWsc,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Free => "free",
            Mode::ConstantU => "constant-u",
            Mode::Ocp => "ocp",
            Mode::OcpWsc => "ocp-wsc",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema version {got} (this tool reads schema = {SCHEMA_VERSION})")]
    Schema { got: i64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{mode} mode requires {what}")]
    MissingForMode { mode: Mode, what: &'static str },
    #[error("{what} is only meaningful in {expected} mode (scenario is {mode})")]
    ForbiddenForMode {
        mode: Mode,
        expected: &'static str,
        what: &'static str,
    },
    #[error("at least one initial state is required")]
    NoInitialStates,
    #[error("initial state {index}: expected [v_a, v_b]")]
    BadInitialState { index: usize },
    #[error("invalid {field}: {reason}")]
    BadField { field: &'static str, reason: String },
    #[error("override {key:?}: {reason}")]
    BadOverride { key: String, reason: String },
}

/// Solver configuration (defaults match the library defaults).
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: StepMethod,
    pub u_max: f64,
    pub omega: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub xi: Option<f64>,
    pub mu0: f64,
    pub gamma: f64,
    pub rounds: usize,
    pub ctol_rel: f64,
}

impl SolverConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            method: self.method,
            omega: self.omega,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            ..SolveOptions::default()
        }
    }

    pub fn penalty_options(&self) -> PenaltyOptions {
        let defaults = PenaltyOptions::default();
        PenaltyOptions {
            mu0: self.mu0,
            gamma: self.gamma,
            rounds: self.rounds,
            ctol_rel: self.ctol_rel,
            mu_cap: defaults.mu_cap,
            inner: SolveOptions {
                method: self.method,
                omega: self.omega,
                tolerance: self.tolerance,
                max_iter: self.max_iter,
                omega_min: defaults.inner.omega_min,
            },
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mode: Mode,
    pub phenotype: Phenotype,
    /// Present exactly for the treated modes.
    pub efficacy: Option<Efficacy>,
    /// Present exactly in constant-u mode.
    pub constant_u: Option<f64>,
    pub grid: TimeGrid,
    pub initial: Vec<State>,
    pub cost: CostWeights,
    pub solver: SolverConfig,
    pub portrait: Option<PortraitSpec>,
}

// ---------------------------------------------------------------------------
// raw document shape

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: i64,
    mode: Mode,
    phenotype: RawPhenotype,
    efficacy: Option<RawEfficacy>,
    grid: RawGrid,
    initial: RawInitial,
    control: Option<RawControl>,
    #[serde(default)]
    cost: RawCost,
    #[serde(default)]
    solver: RawSolver,
    portrait: Option<RawPortrait>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhenotype {
    r_a: f64,
    r_b: f64,
    k_a: f64,
    k_b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEfficacy {
    c_a: f64,
    c_b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t0: f64,
    tf: f64,
    dt: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    states: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    u: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCost {
    target_a: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<String>,
    u_max: Option<f64>,
    omega: Option<f64>,
    tolerance: Option<f64>,
    max_iter: Option<usize>,
    xi: Option<f64>,
    mu0: Option<f64>,
    gamma: Option<f64>,
    rounds: Option<usize>,
    ctol_rel: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPortrait {
    v_a_max: f64,
    v_b_max: f64,
    arrow_grid: Option<usize>,
    seed_grid: Option<usize>,
    horizon: f64,
    dt: Option<f64>,
}

// ---------------------------------------------------------------------------

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_with_overrides(text, &[])
}

/// Parse a scenario, apply dotted-key overrides, then validate.
pub fn parse_scenario_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<Scenario, ScenarioError> {
    let mut doc: toml::Value = text.parse().map_err(ScenarioError::Parse)?;
    for (key, raw_value) in overrides {
        set_dotted(&mut doc, key, raw_value)?;
    }
    let raw = RawScenario::deserialize(doc).map_err(ScenarioError::Parse)?;
    validate(raw)
}

fn set_dotted(doc: &mut toml::Value, key: &str, raw_value: &str) -> Result<(), ScenarioError> {
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ScenarioError::BadOverride {
            key: key.to_string(),
            reason: "empty path segment".into(),
        });
    }
    // parse the value as a TOML literal; fall back to a plain string
    let value = format!("v = {raw_value}")
        .parse::<toml::Value>()
        .ok()
        .and_then(|mut t| t.as_table_mut().and_then(|m| m.remove("v")))
        .unwrap_or_else(|| toml::Value::String(raw_value.to_string()));
    let mut cursor = doc;
    for segment in &segments[..segments.len() - 1] {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| ScenarioError::BadOverride {
                key: key.to_string(),
                reason: format!("{segment} is not a table"),
            })?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let last = segments.last().unwrap();
    let table = cursor
        .as_table_mut()
        .ok_or_else(|| ScenarioError::BadOverride {
            key: key.to_string(),
            reason: format!("{last} cannot be set on a non-table"),
        })?;
    table.insert(last.to_string(), value);
    Ok(())
}

fn validate(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    if raw.schema != SCHEMA_VERSION {
        return Err(ScenarioError::Schema { got: raw.schema });
    }
    let mode = raw.mode;

    let phenotype = Phenotype::new(
        raw.phenotype.r_a,
        raw.phenotype.r_b,
        raw.phenotype.k_a,
        raw.phenotype.k_b,
    )?;

    let efficacy = match (&raw.efficacy, mode) {
        (Some(e), _) => Some(Efficacy::new(e.c_a, e.c_b)?),
        (None, Mode::Free) => None,
        (None, _) => {
            return Err(ScenarioError::MissingForMode {
                mode,
                what: "an [efficacy] section",
            })
        }
    };

    let constant_u = match (&raw.control, mode) {
        (Some(c), Mode::ConstantU) => {
            if !(0.0..=1.0).contains(&c.u) || !c.u.is_finite() {
                return Err(ScenarioError::BadField {
                    field: "control.u",
                    reason: format!("{} outside [0, 1]", c.u),
                });
            }
            Some(c.u)
        }
        (None, Mode::ConstantU) => {
            return Err(ScenarioError::MissingForMode {
                mode,
                what: "a [control] section with the constant dose u",
            })
        }
        (Some(_), _) => {
            return Err(ScenarioError::ForbiddenForMode {
                mode,
                expected: "constant-u",
                what: "a [control] section",
            })
        }
        (None, _) => None,
    };

    let grid = TimeGrid::new(raw.grid.t0, raw.grid.tf, raw.grid.dt)?;

    if raw.initial.states.is_empty() {
        return Err(ScenarioError::NoInitialStates);
    }
    let mut initial = Vec::with_capacity(raw.initial.states.len());
    for (index, pair) in raw.initial.states.iter().enumerate() {
        if pair.len() != 2 {
            return Err(ScenarioError::BadInitialState { index });
        }
        initial.push(State::new(pair[0], pair[1])?);
    }

    if raw.solver.xi.is_some() && mode != Mode::OcpWsc {
        return Err(ScenarioError::ForbiddenForMode {
            mode,
            expected: "ocp-wsc",
            what: "solver.xi",
        });
    }
    let xi = match mode {
        Mode::OcpWsc => {
            let xi = raw.solver.xi.unwrap_or(DEFAULT_XI);
            if !(xi > 0.0) {
                return Err(ScenarioError::BadField {
                    field: "solver.xi",
                    reason: format!("{xi} is not positive"),
                });
            }
            Some(xi)
        }
        _ => None,
    };

    let method = match raw.solver.method.as_deref() {
        None => StepMethod::Rk4,
        Some(name) => name
            .parse()
            .map_err(|reason| ScenarioError::BadField {
                field: "solver.method",
                reason,
            })?,
    };

    let defaults = SolveOptions::default();
    let pdefaults = PenaltyOptions::default();
    let solver = SolverConfig {
        method,
        u_max: raw.solver.u_max.unwrap_or(1.0),
        omega: raw.solver.omega.unwrap_or(defaults.omega),
        tolerance: raw.solver.tolerance.unwrap_or(defaults.tolerance),
        max_iter: raw.solver.max_iter.unwrap_or(defaults.max_iter),
        xi,
        mu0: raw.solver.mu0.unwrap_or(pdefaults.mu0),
        gamma: raw.solver.gamma.unwrap_or(pdefaults.gamma),
        rounds: raw.solver.rounds.unwrap_or(pdefaults.rounds),
        ctol_rel: raw.solver.ctol_rel.unwrap_or(pdefaults.ctol_rel),
    };
    if !(solver.u_max > 0.0 && solver.u_max <= 1.0) {
        return Err(ScenarioError::BadField {
            field: "solver.u_max",
            reason: format!("{} outside (0, 1]", solver.u_max),
        });
    }
    if mode == Mode::ConstantU {
        if let Some(u) = constant_u {
            if u > solver.u_max {
                return Err(ScenarioError::BadField {
                    field: "control.u",
                    reason: format!("{u} exceeds u_max = {}", solver.u_max),
                });
            }
        }
    }

    let cost = CostWeights::new(
        raw.cost.target_a.unwrap_or(phenotype.k_a),
        xi.unwrap_or(DEFAULT_XI),
        0.0,
    )?;

    let portrait = match raw.portrait {
        None => None,
        Some(p) => Some(
            PortraitSpec::new(
                p.v_a_max,
                p.v_b_max,
                p.arrow_grid.unwrap_or(15),
                p.seed_grid.unwrap_or(5),
                p.horizon,
                p.dt.unwrap_or(0.01),
            )
            .map_err(|reason| ScenarioError::BadField {
                field: "portrait",
                reason,
            })?,
        ),
    };

    Ok(Scenario {
        mode,
        phenotype,
        efficacy,
        constant_u,
        grid,
        initial,
        cost,
        solver,
        portrait,
    })
}

/// Built-in scenario fixtures mirroring the repository's `scenarios/`
/// directory.
pub mod fixtures {
    pub const FIG1: &str = include_str!("../../../scenarios/fig1.scenario");
    pub const FIG3: &str = include_str!("../../../scenarios/fig3.scenario");
    pub const FIG4: &str = include_str!("../../../scenarios/fig4.scenario");
    pub const FIG6: &str = include_str!("../../../scenarios/fig6.scenario");
}
