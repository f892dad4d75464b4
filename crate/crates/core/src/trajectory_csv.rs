//! Trajectory persistence: `t,v_a,v_b,u,cost_rate,v_c` with one row per grid
//! node. The `u` column holds the dose applied on the preceding interval and
//! is empty on the first row; `cost_rate` is the running-cost integrand
//! evaluated with that dose (dose zero on the first row). Numbers are
//! written in shortest round-trip form, so parsing a written file recovers
//! the trajectory bit-exactly.

use std::fmt::Write as _;

use thiserror::Error;

use crate::integrate::Trajectory;
use crate::model::{cost_integrand, CostWeights};

pub const CSV_HEADER: &str = "t,v_a,v_b,u,cost_rate,v_c";

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("line {line}: expected {expected} fields, got {got}")]
    FieldCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: bad number in column {column}: {value:?}")]
    BadNumber {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("missing or wrong header (expected {CSV_HEADER:?})")]
    Header,
    #[error("rows are not strictly increasing in t at line {line}")]
    NonMonotoneTime { line: usize },
    #[error("no data rows")]
    Empty,
}

/// Render a trajectory as CSV.
pub fn write_trajectory_csv(traj: &Trajectory, w: &CostWeights) -> String {
    let mut out = String::with_capacity(64 * traj.states.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, aug) in traj.states.iter().enumerate() {
        let t = traj.grid.time(i);
        let (u_field, u_applied) = if i == 0 {
            (String::new(), 0.0)
        } else {
            let u = traj.controls[i - 1];
            (u.to_string(), u)
        };
        let rate = cost_integrand(aug.state, u_applied, w);
        writeln!(
            out,
            "{t},{},{},{u_field},{rate},{}",
            aug.state.v_a, aug.state.v_b, aug.v_c
        )
        .expect("string write");
    }
    out
}

/// A parsed-back trajectory file: node times, states, accumulated cost, and
/// the per-interval doses.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrajectory {
    pub times: Vec<f64>,
    pub v_a: Vec<f64>,
    pub v_b: Vec<f64>,
    pub v_c: Vec<f64>,
    pub controls: Vec<f64>,
}

/// Parse a file written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(text: &str) -> Result<ParsedTrajectory, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == CSV_HEADER => {}
        _ => return Err(CsvError::Header),
    }
    let mut parsed = ParsedTrajectory {
        times: Vec::new(),
        v_a: Vec::new(),
        v_b: Vec::new(),
        v_c: Vec::new(),
        controls: Vec::new(),
    };
    let parse = |line: usize, column: &'static str, value: &str| -> Result<f64, CsvError> {
        value.parse::<f64>().map_err(|_| CsvError::BadNumber {
            line,
            column,
            value: value.to_string(),
        })
    };
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 6 {
            return Err(CsvError::FieldCount {
                line,
                expected: 6,
                got: fields.len(),
            });
        }
        let t = parse(line, "t", fields[0])?;
        if let Some(prev) = parsed.times.last() {
            if t <= *prev {
                return Err(CsvError::NonMonotoneTime { line });
            }
        }
        parsed.times.push(t);
        parsed.v_a.push(parse(line, "v_a", fields[1])?);
        parsed.v_b.push(parse(line, "v_b", fields[2])?);
        if parsed.times.len() == 1 {
            if !fields[3].is_empty() {
                return Err(CsvError::BadNumber {
                    line,
                    column: "u",
                    value: fields[3].to_string(),
                });
            }
        } else {
            parsed.controls.push(parse(line, "u", fields[3])?);
        }
        // cost_rate (fields[4]) is derived data; validated but not stored
        parse(line, "cost_rate", fields[4])?;
        parsed.v_c.push(parse(line, "v_c", fields[5])?);
    }
    if parsed.times.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(parsed)
}
