//! Gaussian knockoffs for a correlated design, then the knockoff+ threshold
//! on a vector of importance statistics.
//!
//! cargo run --example knockoff_filter

use smrmr::dgp::sample_ar_gaussian;
use smrmr::knockoff::{knockoff_threshold, sample_knockoffs, select};

fn main() -> smrmr::Result<()> {
    let x = sample_ar_gaussian(2000, 5, 0.5, 3)?;
    let ko = sample_knockoffs(&x, 4)?;
    println!("s (covariance scale) = {:.4}", ko.s_covariance_scale());
    println!("shrinkage applied to the correlation estimate: {}", ko.shrinkage);

    let (xv, kv) = (x.view(), ko.xk.view());
    let n = x.nrows() as f64;
    for j in 0..5 {
        let c = xv.column(j).dot(&kv.column(j)) / n;
        println!("x{j}: corr with own knockoff {c:.3}");
    }

    let w = [2.1, 1.7, 1.5, 1.2, 0.9, 0.8, -0.4, 0.3, -0.2, 0.1];
    for alpha in [0.1, 0.2, 0.3] {
        println!("alpha {alpha}: threshold {}", knockoff_threshold(&w, alpha));
    }
    let rep = select(&[0.3, -0.5, 0.2], 0.1, true)?;
    println!("escalated report: {}", rep.to_json().replace('\n', " "));
    Ok(())
}
