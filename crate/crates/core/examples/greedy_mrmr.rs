//! Greedy forward mRMR next to the sparse penalized solution on the same
//! relevance/redundancy system.
//!
//! cargo run --example greedy_mrmr

use smrmr::assoc::MeasureSpec;
use smrmr::bench::{greedy_mrmr, mrmr_criterion};
use smrmr::dgp::{generate, DgpId, DgpSpec};
use smrmr::penalty::PenaltySpec;
use smrmr::solver::{build_system, solve_smrmr, SolverConfig};

fn main() -> smrmr::Result<()> {
    let ds = generate(&DgpSpec::new(DgpId::N2a, 300, 40, 8))?;
    let sys = build_system(&ds.x, &ds.y, &MeasureSpec::nr_hsic())?;

    let greedy = greedy_mrmr(&sys, 4)?;
    println!("greedy order {greedy:?}, criterion {:.4}", mrmr_criterion(&sys, &greedy));

    let c = solve_smrmr(&sys, &PenaltySpec::mcp(0.02, 3.0), &SolverConfig::default())?;
    println!("penalized support {:?}", c.support);
    println!("true support {:?}", ds.true_support);
    Ok(())
}
