//! The full pipeline stage by stage on a synthetic p > n problem, then the
//! one-call version.
//!
//! cargo run --release --example screening_pipeline

use smrmr::dgp::{generate, DgpId, DgpSpec};
use smrmr::pipeline::{joint_design, knockoff_stage, run, screen, tune, PipelineConfig};

fn main() -> smrmr::Result<()> {
    let ds = generate(&DgpSpec::new(DgpId::L1b, 200, 400, 11))?;
    let cfg = PipelineConfig {
        escalate: true,
        seed: 5,
        ..PipelineConfig::default()
    };

    let scr = screen(&ds.x, &ds.y, &cfg)?;
    println!(
        "screening: {} prescreened, kept {:?} (p_max {})",
        scr.s0b.len(),
        scr.s0,
        scr.p_max
    );
    let design = joint_design(&scr, &cfg)?;
    println!("joint design: {} rows x {} columns", design.x.nrows(), 2 * design.x.ncols());
    let tuned = tune(&design, &cfg)?;
    for (pen, loss) in &tuned.losses {
        println!("  {pen:<26} validation loss {loss:.5}");
    }
    let local = knockoff_stage(&design, &tuned.chosen, &cfg)?;
    let picked: Vec<usize> = local.selected.iter().map(|&j| scr.s0[j]).collect();
    println!("selected {picked:?} at alpha {}", local.alpha_used);

    let report = run(&ds.x, &ds.y, &cfg)?;
    println!("run(): {:?}, true support {:?}", report.selected, ds.true_support);
    Ok(())
}
