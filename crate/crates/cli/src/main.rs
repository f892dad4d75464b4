//! Command-line driver: simulate scenarios, report equilibria, solve the
//! dose-scheduling problems, draw phase portraits, and run the built-in
//! verification checks.
//!
//! Artifacts (CSV/JSON/SVG) are deterministic: the same command, scenario,
//! and overrides produce byte-identical files. Progress and human-readable
//! notes go to stderr only.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use straincomp::equilibria::{equilibria_constant_control, equilibria_free, reports_to_json};
use straincomp::integrate::{integrate, StepMethod, Trajectory};
use straincomp::model::State;
use straincomp::ocp::{solve_fbsm, solve_penalty, OcpError, SolveReport};
use straincomp::portrait::{phase_portrait, portrait_csv, portrait_svg};
use straincomp::scenario::{parse_scenario_with_overrides, Mode, Scenario};
use straincomp::trajectory_csv::write_trajectory_csv;
use straincomp::verify;

#[derive(Parser)]
#[command(
    name = "straincomp",
    version,
    about = "Two-strain viral competition: simulation, equilibria, and optimal dosing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario dynamics; one trajectory CSV per initial state
    Simulate(RunArgs),
    /// Closed-form equilibrium analysis; writes a JSON report
    Equilibria(RunArgs),
    /// Solve the dose-scheduling problem; writes a JSON summary plus CSVs
    Optimize(RunArgs),
    /// Direction field, trajectory bundle, and equilibria; writes CSV + SVG
    Portrait(RunArgs),
    /// Run the built-in verification checks and print one line per check
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Dotted-key override applied before validation, e.g. --set grid.dt=0.005
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Integration method: euler|implicit-euler|trapezoid|rk4, or "all"
    /// (simulate only) to write every method's trajectory
    #[arg(long)]
    method: Option<String>,
    /// Step-size shorthand for --set grid.dt=X
    #[arg(long)]
    dt: Option<f64>,
}

enum Failure {
    Validation(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Validation(_) | Failure::Io(_) => ExitCode::from(1),
            Failure::Solver(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn solver(e: impl std::fmt::Display) -> Failure {
    Failure::Solver(e.to_string())
}

fn ocp_failure(e: OcpError) -> Failure {
    match e {
        OcpError::InvalidOptions(_) | OcpError::InfeasibleStart { .. } => validation(e),
        other => solver(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Equilibria(args) => run_equilibria(&args),
        Command::Optimize(args) => run_optimize(&args),
        Command::Portrait(args) => run_portrait(&args),
        Command::Verify => return run_verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("straincomp: error: {}", failure.message());
            failure.exit_code()
        }
    }
}

fn load_scenario(args: &RunArgs, method_override: Option<&str>) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| Failure::Io(format!("{}: {e}", args.scenario.display())))?;
    let mut overrides: Vec<(String, String)> = Vec::new();
    for entry in &args.set {
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            Failure::Validation(format!("--set {entry:?}: expected KEY=VALUE"))
        })?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    if let Some(m) = method_override {
        overrides.push(("solver.method".into(), format!("\"{m}\"")));
    }
    if let Some(dt) = args.dt {
        overrides.push(("grid.dt".into(), dt.to_string()));
    }
    parse_scenario_with_overrides(&text, &overrides).map_err(validation)
}

fn stem(args: &RunArgs) -> String {
    args.scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn require_mode(scenario: &Scenario, verb: &str, allowed: &[Mode]) -> Result<(), Failure> {
    if allowed.contains(&scenario.mode) {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{verb} expects a scenario in {} mode, got {}",
            allowed
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join("/"),
            scenario.mode
        )))
    }
}

fn run_one_trajectory(
    scenario: &Scenario,
    method: StepMethod,
    init: State,
) -> Result<Trajectory, Failure> {
    let u = scenario.constant_u.unwrap_or(0.0);
    let controls = vec![u; scenario.grid.steps()];
    match &scenario.efficacy {
        Some(e) => integrate(
            method,
            &scenario.phenotype,
            e,
            &controls,
            &scenario.grid,
            init,
            &scenario.cost,
        ),
        None => straincomp::integrate::integrate_free(
            method,
            &scenario.phenotype,
            &scenario.grid,
            init,
            &scenario.cost,
        ),
    }
    .map_err(solver)
}

fn run_simulate(args: &RunArgs) -> Result<(), Failure> {
    let (all_methods, method_override) = match args.method.as_deref() {
        Some("all") => (true, None),
        other => (false, other),
    };
    let scenario = load_scenario(args, method_override)?;
    require_mode(&scenario, "simulate", &[Mode::Free, Mode::ConstantU])?;
    let methods: Vec<StepMethod> = if all_methods {
        StepMethod::ALL.to_vec()
    } else {
        vec![scenario.solver.method]
    };
    let stem = stem(args);
    for (i, init) in scenario.initial.iter().enumerate() {
        for method in &methods {
            let traj = run_one_trajectory(&scenario, *method, *init)?;
            let end = traj.final_state();
            eprintln!(
                "seed {i} ({}, {}) with {method}: final state ({}, {}) after {} steps",
                init.v_a,
                init.v_b,
                end.v_a,
                end.v_b,
                traj.grid.steps()
            );
            let csv = write_trajectory_csv(&traj, &scenario.cost);
            write_file(&args.out, &format!("{stem}_seed{i}_{method}.csv"), &csv)?;
        }
    }
    Ok(())
}

fn run_equilibria(args: &RunArgs) -> Result<(), Failure> {
    let scenario = load_scenario(args, args.method.as_deref())?;
    require_mode(&scenario, "equilibria", &[Mode::Free, Mode::ConstantU])?;
    let reports = match scenario.mode {
        Mode::Free => equilibria_free(&scenario.phenotype),
        _ => equilibria_constant_control(
            &scenario.phenotype,
            scenario.efficacy.as_ref().expect("validated"),
            scenario.constant_u.expect("validated"),
        ),
    };
    let json = reports_to_json(&reports);
    write_file(&args.out, &format!("{}_equilibria.json", stem(args)), &json)?;
    Ok(())
}

fn write_solve_outputs(
    args: &RunArgs,
    scenario: &Scenario,
    seed_index: usize,
    report: &SolveReport,
) -> Result<(), Failure> {
    let stem = stem(args);
    write_file(
        &args.out,
        &format!("{stem}_solve_seed{seed_index}.json"),
        &report.summary_json(),
    )?;
    let csv = write_trajectory_csv(&report.trajectory, &scenario.cost);
    write_file(
        &args.out,
        &format!("{stem}_solution_seed{seed_index}.csv"),
        &csv,
    )?;
    Ok(())
}

fn run_optimize(args: &RunArgs) -> Result<(), Failure> {
    let scenario = load_scenario(args, args.method.as_deref())?;
    require_mode(&scenario, "optimize", &[Mode::Ocp, Mode::OcpWsc])?;
    let e = scenario.efficacy.as_ref().expect("validated");
    for (i, init) in scenario.initial.iter().enumerate() {
        let report = match scenario.mode {
            Mode::Ocp => solve_fbsm(
                &scenario.phenotype,
                e,
                &scenario.cost,
                &scenario.grid,
                *init,
                scenario.solver.u_max,
                &scenario.solver.solve_options(),
            ),
            _ => solve_penalty(
                &scenario.phenotype,
                e,
                &scenario.cost,
                &scenario.grid,
                *init,
                scenario.solver.u_max,
                scenario.solver.xi.expect("validated"),
                &scenario.solver.penalty_options(),
            ),
        }
        .map_err(ocp_failure)?;
        eprintln!(
            "seed {i}: objective {} in {} iterations (converged: {}, violation: {:e})",
            report.objective, report.iterations, report.converged, report.constraint_violation
        );
        write_solve_outputs(args, &scenario, i, &report)?;
    }
    Ok(())
}

fn run_portrait(args: &RunArgs) -> Result<(), Failure> {
    let scenario = load_scenario(args, args.method.as_deref())?;
    require_mode(&scenario, "portrait", &[Mode::Free, Mode::ConstantU])?;
    let spec = scenario.portrait.ok_or_else(|| {
        Failure::Validation("portrait requires a [portrait] section in the scenario".into())
    })?;
    let portrait = phase_portrait(
        &scenario.phenotype,
        scenario.efficacy.as_ref(),
        scenario.constant_u.unwrap_or(0.0),
        &spec,
    );
    for path in &portrait.paths {
        if let Some(err) = &path.error {
            eprintln!(
                "seed ({}, {}) failed: {err}",
                path.seed.v_a, path.seed.v_b
            );
        }
    }
    let stem = stem(args);
    write_file(&args.out, &format!("{stem}_portrait.csv"), &portrait_csv(&portrait))?;
    write_file(&args.out, &format!("{stem}_portrait.svg"), &portrait_svg(&portrait))?;
    Ok(())
}

fn run_verify() -> ExitCode {
    let results = verify::run_all();
    let mut all_passed = true;
    for r in &results {
        println!("{}", r.line());
        all_passed &= r.passed;
    }
    if all_passed {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!(
            "{} of {} checks failed",
            results.iter().filter(|r| !r.passed).count(),
            results.len()
        );
        ExitCode::from(2)
    }
}
