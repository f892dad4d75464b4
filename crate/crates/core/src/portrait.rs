//! Phase-portrait data: a normalized direction field on a rectangular
//! window, a bundle of trajectories started from an interior seed grid, and
//! the equilibria overlay. Emitted as sectioned CSV plus a standalone SVG.

use std::fmt::Write as _;

use crate::equilibria::{
    equilibria_constant_control, equilibria_free, EquilibriumPoint, EquilibriumReport, Verdict,
};
use crate::integrate::{integrate_constant, StepMethod, TimeGrid};
use crate::model::{rhs_controlled, rhs_free, CostWeights, Efficacy, Phenotype, State};

/// Portrait window and sampling resolution. The window lives in the closed
/// non-negative quadrant; only that region carries biological meaning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitSpec {
    pub v_a_max: f64,
    pub v_b_max: f64,
    /// Direction-field nodes per axis, boundaries included.
    pub arrow_grid: usize,
    /// Interior trajectory seeds per axis.
    pub seed_grid: usize,
    /// Integration horizon for the bundle.
    pub horizon: f64,
    pub dt: f64,
}

impl PortraitSpec {
    pub fn new(
        v_a_max: f64,
        v_b_max: f64,
        arrow_grid: usize,
        seed_grid: usize,
        horizon: f64,
        dt: f64,
    ) -> Result<Self, String> {
        if !(v_a_max > 0.0 && v_b_max > 0.0) {
            return Err(format!(
                "window must be positive (got {v_a_max} x {v_b_max})"
            ));
        }
        if arrow_grid < 2 {
            return Err("arrow_grid must be at least 2".into());
        }
        if seed_grid < 1 {
            return Err("seed_grid must be at least 1".into());
        }
        TimeGrid::new(0.0, horizon, dt).map_err(|e| e.to_string())?;
        Ok(Self {
            v_a_max,
            v_b_max,
            arrow_grid,
            seed_grid,
            horizon,
            dt,
        })
    }

    /// Interior seed positions, strictly inside the window so no seed sits
    /// on an invariant axis.
    pub fn seeds(&self) -> Vec<State> {
        let n = self.seed_grid;
        let mut seeds = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                seeds.push(State {
                    v_a: self.v_a_max * (i + 1) as f64 / (n + 1) as f64,
                    v_b: self.v_b_max * (j + 1) as f64 / (n + 1) as f64,
                });
            }
        }
        seeds
    }
}

/// One direction-field sample: unit direction and field magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrow {
    pub v_a: f64,
    pub v_b: f64,
    pub dir_a: f64,
    pub dir_b: f64,
    pub magnitude: f64,
}

/// One integrated seed path (decimated for plotting); a failed seed keeps
/// its error message instead of aborting the portrait.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPath {
    pub seed: State,
    pub times: Vec<f64>,
    pub points: Vec<State>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    pub spec: PortraitSpec,
    pub u: f64,
    pub arrows: Vec<Arrow>,
    pub paths: Vec<SeedPath>,
    pub equilibria: Vec<EquilibriumReport>,
}

// keep plotted polylines near this many vertices
const PATH_POINT_BUDGET: usize = 800;

/// Build the portrait dataset for the free field (`efficacy: None`, `u`
/// ignored as zero) or the constant-dose field.
pub fn phase_portrait(
    p: &Phenotype,
    efficacy: Option<&Efficacy>,
    u: f64,
    spec: &PortraitSpec,
) -> Portrait {
    let field = |s: State| -> [f64; 2] {
        match efficacy {
            Some(e) => rhs_controlled(p, e, s, u),
            None => rhs_free(p, s),
        }
    };

    let m = spec.arrow_grid;
    let mut arrows = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let s = State {
                v_a: spec.v_a_max * i as f64 / (m - 1) as f64,
                v_b: spec.v_b_max * j as f64 / (m - 1) as f64,
            };
            let d = field(s);
            let magnitude = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let (dir_a, dir_b) = if magnitude > 0.0 {
                (d[0] / magnitude, d[1] / magnitude)
            } else {
                (0.0, 0.0)
            };
            arrows.push(Arrow {
                v_a: s.v_a,
                v_b: s.v_b,
                dir_a,
                dir_b,
                magnitude,
            });
        }
    }

    let grid = TimeGrid::new(0.0, spec.horizon, spec.dt).expect("spec validated");
    let w = CostWeights::tracking(p);
    let stride = (grid.steps() / PATH_POINT_BUDGET).max(1);
    let no_treatment = Efficacy { c_a: 1.0, c_b: 0.0 };
    let paths = spec
        .seeds()
        .into_iter()
        .map(|seed| {
            let result = integrate_constant(
                StepMethod::Rk4,
                p,
                efficacy.unwrap_or(&no_treatment),
                if efficacy.is_some() { u } else { 0.0 },
                &grid,
                seed,
                &w,
            );
            match result {
                Ok(traj) => {
                    let mut times = Vec::new();
                    let mut points = Vec::new();
                    for (i, aug) in traj.states.iter().enumerate() {
                        if i % stride == 0 || i == traj.states.len() - 1 {
                            times.push(grid.time(i));
                            points.push(aug.state);
                        }
                    }
                    SeedPath {
                        seed,
                        times,
                        points,
                        error: None,
                    }
                }
                Err(e) => SeedPath {
                    seed,
                    times: Vec::new(),
                    points: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let equilibria = match efficacy {
        Some(e) => equilibria_constant_control(p, e, u),
        None => equilibria_free(p),
    };

    Portrait {
        spec: *spec,
        u: if efficacy.is_some() { u } else { 0.0 },
        arrows,
        paths,
        equilibria,
    }
}

/// Sectioned CSV rendering: `# arrows`, one `# path` per seed, and the
/// equilibria overlay.
pub fn portrait_csv(portrait: &Portrait) -> String {
    let mut out = String::new();
    out.push_str("# arrows\n");
    out.push_str("v_a,v_b,dir_a,dir_b,magnitude\n");
    for a in &portrait.arrows {
        writeln!(out, "{},{},{},{},{}", a.v_a, a.v_b, a.dir_a, a.dir_b, a.magnitude).unwrap();
    }
    for (i, path) in portrait.paths.iter().enumerate() {
        match &path.error {
            Some(msg) => {
                writeln!(
                    out,
                    "# path {i} seed=({},{}) failed: {msg}",
                    path.seed.v_a, path.seed.v_b
                )
                .unwrap();
            }
            None => {
                writeln!(
                    out,
                    "# path {i} seed=({},{})",
                    path.seed.v_a, path.seed.v_b
                )
                .unwrap();
                out.push_str("t,v_a,v_b\n");
                for (t, s) in path.times.iter().zip(&path.points) {
                    writeln!(out, "{t},{},{}", s.v_a, s.v_b).unwrap();
                }
            }
        }
    }
    out.push_str("# equilibria\n");
    out.push_str("kind,v_a,v_b,eig_1,eig_2,verdict\n");
    for r in &portrait.equilibria {
        let (kind, a, b) = match r.point {
            EquilibriumPoint::Point(s) => ("point", s.v_a, s.v_b),
            EquilibriumPoint::Line {
                v_a_intercept,
                v_b_intercept,
            } => ("line", v_a_intercept, v_b_intercept),
        };
        let (e1, e2) = r.eigenvalues.real_parts();
        let verdict = match r.verdict {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
            Verdict::LineDegenerate => "line-degenerate",
        };
        writeln!(out, "{kind},{a},{b},{e1},{e2},{verdict}").unwrap();
    }
    out
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 40.0;

fn verdict_color(v: Verdict) -> &'static str {
    match v {
        Verdict::Stable => "#2e7d32",
        Verdict::Unstable => "#c62828",
        Verdict::Marginal => "#ef6c00",
        Verdict::LineDegenerate => "#1565c0",
    }
}

/// Standalone SVG rendering: the direction field as short segments, one
/// polyline per seed path, and one marker per equilibrium (circles for
/// points, a segment for the degenerate line), colored by verdict.
pub fn portrait_svg(portrait: &Portrait) -> String {
    let spec = &portrait.spec;
    let span = SVG_SIZE - 2.0 * SVG_MARGIN;
    let px = |v_a: f64| SVG_MARGIN + v_a / spec.v_a_max * span;
    let py = |v_b: f64| SVG_SIZE - SVG_MARGIN - v_b / spec.v_b_max * span;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" \
         viewBox=\"0 0 {SVG_SIZE} {SVG_SIZE}\">"
    )
    .unwrap();
    writeln!(
        out,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{span}\" height=\"{span}\" fill=\"none\" \
         stroke=\"#444444\" stroke-width=\"1\"/>",
        m = SVG_MARGIN
    )
    .unwrap();

    let max_mag = portrait
        .arrows
        .iter()
        .map(|a| a.magnitude)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cell = span / (spec.arrow_grid.max(2) - 1) as f64;
    out.push_str("<g stroke=\"#9e9e9e\" stroke-width=\"1\">\n");
    for a in &portrait.arrows {
        let len = 0.45 * cell * (0.25 + 0.75 * a.magnitude / max_mag);
        if a.magnitude == 0.0 {
            continue;
        }
        let x1 = px(a.v_a);
        let y1 = py(a.v_b);
        // screen y grows downward
        let x2 = x1 + a.dir_a * len;
        let y2 = y1 - a.dir_b * len;
        writeln!(out, "<line x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y2}\"/>").unwrap();
    }
    out.push_str("</g>\n");

    for path in &portrait.paths {
        if path.error.is_some() || path.points.is_empty() {
            // every seed still contributes a polyline so plots are countable
            writeln!(
                out,
                "<polyline points=\"{},{}\" fill=\"none\" stroke=\"#bdbdbd\" class=\"failed\"/>",
                px(path.seed.v_a),
                py(path.seed.v_b)
            )
            .unwrap();
            continue;
        }
        let mut points = String::with_capacity(path.points.len() * 16);
        for s in &path.points {
            write!(points, "{:.3},{:.3} ", px(s.v_a), py(s.v_b)).unwrap();
        }
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#3949ab\" stroke-width=\"1.2\"/>",
            points.trim_end()
        )
        .unwrap();
    }

    for r in &portrait.equilibria {
        let color = verdict_color(r.verdict);
        match r.point {
            EquilibriumPoint::Point(s) => {
                writeln!(
                    out,
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"5\" fill=\"{color}\" \
                     stroke=\"#ffffff\" stroke-width=\"1\"/>",
                    px(s.v_a),
                    py(s.v_b)
                )
                .unwrap();
            }
            EquilibriumPoint::Line {
                v_a_intercept,
                v_b_intercept,
            } => {
                writeln!(
                    out,
                    "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" \
                     stroke=\"{color}\" stroke-width=\"2.5\" stroke-dasharray=\"6 3\"/>",
                    px(v_a_intercept),
                    py(0.0),
                    px(0.0),
                    py(v_b_intercept)
                )
                .unwrap();
            }
        }
    }

    out.push_str("</svg>\n");
    out
}
