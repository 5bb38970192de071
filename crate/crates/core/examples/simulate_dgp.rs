//! Draw each synthetic design once and summarize the response.
//!
//! cargo run --example simulate_dgp

use smrmr::dgp::{generate, DgpId, DgpSpec};

fn main() -> smrmr::Result<()> {
    for id in DgpId::ALL {
        let ds = generate(&DgpSpec::new(id, 500, 100, 1))?;
        let y = ds.y.as_slice();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
        println!(
            "{id}: {:?}, support {:?}, y mean {mean:.3} sd {sd:.3}",
            ds.task, ds.true_support
        );
    }
    Ok(())
}
