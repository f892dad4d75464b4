//! One-off probe: converge the penalized solves hard and report the
//! violation at each penalty weight's optimum.

use straincomp::integrate::TimeGrid;
use straincomp::model::{CostWeights, Efficacy, Phenotype, State};
use straincomp::ocp::{solve_penalty, PenaltyOptions, SolveOptions};

fn main() {
    let p = Phenotype::new(3.0, 1.0, 10.0, 12.0).unwrap();
    let e = Efficacy::new(0.9, 0.5).unwrap();
    let w = CostWeights::tracking(&p);
    let grid = TimeGrid::new(0.0, 60.0, 0.5).unwrap();
    let init = State { v_a: 1.0, v_b: 0.3 };

    let args: Vec<String> = std::env::args().collect();
    let max_iter: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let tolerance: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-7);
    let rounds: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(6);

    let popts = PenaltyOptions {
        mu0: 10.0,
        gamma: 10.0,
        rounds,
        ctol_rel: 1e-3,
        inner: SolveOptions {
            max_iter,
            tolerance,
            omega_min: 2f64.powi(-40),
            ..SolveOptions::default()
        },
        ..PenaltyOptions::default()
    };
    let t0 = std::time::Instant::now();
    match solve_penalty(&p, &e, &w, &grid, init, 1.0, 0.5, &popts) {
        Ok(report) => {
            for r in &report.penalty_rounds {
                println!(
                    "mu={:>10.0}  viol={:.6e}  obj={:.6}  iters={:>7}  converged={}",
                    r.mu, r.constraint_violation, r.objective, r.iterations, r.converged
                );
            }
            println!(
                "met={} final violation {:.3e} total iters {} elapsed {:.1}s",
                report.constraint_met,
                report.constraint_violation,
                report.iterations,
                t0.elapsed().as_secs_f64()
            );
        }
        Err(e) => println!("error: {e}"),
    }
}
