//! Marginal dependence between a response and a few candidate features,
//! with both measures.
//!
//! cargo run --example dependence_measures

use smrmr::assoc::{dependence, MeasureSpec};
use smrmr::dgp::sample_ar_gaussian;
use smrmr::Sample;

fn main() -> smrmr::Result<()> {
    let x = sample_ar_gaussian(300, 4, 0.0, 1)?;
    let v = x.view();
    // y depends on x0 linearly and on x1 only through its square
    let y: Vec<f64> = (0..300)
        .map(|i| v[[i, 0]] + 2.0 * v[[i, 1]].powi(2) + 0.3 * v[[i, 3]])
        .collect();
    let y = Sample::from_vec(y)?;

    println!("{:>8} {:>10} {:>10}", "feature", "nr-HSIC", "PC^2");
    for k in 0..4 {
        let col = x.column(k)?;
        let h = dependence(&col, &y, &MeasureSpec::nr_hsic())?;
        let p = dependence(&col, &y, &MeasureSpec::pc())?;
        println!("{:>8} {h:>10.4} {p:>10.4}", format!("x{k}"));
    }
    Ok(())
}
