//! Solve the penalized relevance/redundancy problem on a small hand-built
//! system under each penalty family.
//!
//! cargo run --example penalized_solver

use ndarray::array;
use smrmr::penalty::PenaltySpec;
use smrmr::solver::{solve_smrmr, AssocSystem, SolverConfig};

fn main() -> smrmr::Result<()> {
    // features 0 and 1 are near duplicates; 2 is weaker but distinct
    let relevance = array![0.60, 0.58, 0.30, 0.02];
    let redundancy = array![
        [1.00, 0.95, 0.10, 0.05],
        [0.95, 1.00, 0.12, 0.05],
        [0.10, 0.12, 1.00, 0.08],
        [0.05, 0.05, 0.08, 1.00]
    ];
    let sys = AssocSystem::new(relevance, redundancy)?;
    let cfg = SolverConfig::default();
    for pen in [
        PenaltySpec::none(),
        PenaltySpec::lasso(0.05),
        PenaltySpec::scad(0.05, 3.7),
        PenaltySpec::mcp(0.05, 3.0),
    ] {
        let c = solve_smrmr(&sys, &pen, &cfg)?;
        println!(
            "{pen:<26} theta = {:.4}  support = {:?}  objective = {:.5}",
            c.theta, c.support, c.objective
        );
    }
    Ok(())
}
