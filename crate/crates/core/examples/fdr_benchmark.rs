//! Monte-Carlo comparison of two methods on one design: selection quality,
//! empty-set frequency and downstream error.
//!
//! cargo run --release --example fdr_benchmark

use smrmr::assoc::MeasureSpec;
use smrmr::bench::fdr_experiment;
use smrmr::dgp::{DgpId, DgpSpec};
use smrmr::penalty::PenaltySpec;
use smrmr::pipeline::PipelineConfig;

fn main() -> smrmr::Result<()> {
    let spec = DgpSpec::new(DgpId::L1a, 100, 100, 2024);
    let methods = [
        PipelineConfig::default(),
        PipelineConfig {
            escalate: true,
            ..PipelineConfig::default()
        },
        PipelineConfig {
            measure: MeasureSpec::nr_hsic(),
            penalty: PenaltySpec::lasso(0.01),
            ..PipelineConfig::default()
        },
    ];
    for cfg in &methods {
        let r = fdr_experiment(&spec, cfg, 20, None, None, true)?;
        let (tpr, fdr, mse) = (r.tpr.unwrap(), r.fdr.unwrap(), r.mse.unwrap());
        println!(
            "{:<18} TPR {:.2}  FDR {:.2} (SE {:.2})  MSE {:.2}  empty {:.2}",
            r.method,
            tpr.mean,
            fdr.mean,
            fdr.se,
            mse.mean,
            r.empty_frequency.unwrap()
        );
    }
    Ok(())
}
