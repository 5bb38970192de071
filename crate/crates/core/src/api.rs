//! Array-and-mapping entry points for host-language bindings. Configuration
//! arrives as a JSON mapping with the config-file schema; nothing here adds
//! options of its own.

use ndarray::{ArrayView1, ArrayView2};

use crate::bench::{run_benchmark, BenchConfig, BenchResult};
use crate::data::{DataMatrix, Sample};
use crate::dgp::{generate, DgpSpec, SynthDataset};
use crate::error::{Error, Result};
use crate::io::config_from_json;
use crate::knockoff::KnockoffReport;
use crate::pipeline::run;

/// Run the pipeline on in-memory arrays.
pub fn select(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    config: &serde_json::Value,
) -> Result<KnockoffReport> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "shape mismatch: X has {} rows, y has {}",
            x.nrows(),
            y.len()
        )));
    }
    let cfg = config_from_json(config)?;
    let x = DataMatrix::new(x.to_owned())?;
    let y = Sample::new(y.to_owned())?;
    run(&x, &y, &cfg)
}

/// Draw one synthetic dataset; `dgp` accepts ids such as "1a".
pub fn simulate(dgp: &str, n: usize, p: usize, seed: u64) -> Result<SynthDataset> {
    generate(&DgpSpec::new(dgp.parse()?, n, p, seed))
}

/// Benchmark sweep from a JSON mapping with the benchmark config schema.
pub fn benchmark(config: &serde_json::Value, workers: Option<usize>) -> Result<Vec<BenchResult>> {
    let cfg: BenchConfig = serde::Deserialize::deserialize(config)
        .map_err(|e| Error::Parse(format!("benchmark config: {e}")))?;
    run_benchmark(&cfg, workers)
}
