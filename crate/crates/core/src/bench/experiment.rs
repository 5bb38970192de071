//! Monte-Carlo replicate harness: run the pipeline on fresh synthetic draws,
//! score the selections and summarize.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{downstream_fit, score_selection};
use crate::dgp::{generate, DgpId, DgpSpec, PoissonLink, Task};
use crate::error::{Error, Result};
use crate::numeric::mix_seed;
use crate::penalty::PenaltyKind;
use crate::pipeline::{run, PipelineConfig};

pub const MIN_REPLICATES: usize = 10;
/// (n, p) pairs of the default benchmark grid.
pub const DEFAULT_SIZES: [(usize, usize); 4] = [(100, 100), (100, 500), (100, 5000), (500, 5000)];

// child-seed stream for independent test sets
const SEED_TEST: u64 = 0x7E57;
const SEED_DOWNSTREAM: u64 = 0xD0;

/// "SmRMR(PC, MCP)", with a "2" suffix on SmRMR when escalating.
pub fn method_label(cfg: &PipelineConfig) -> String {
    let measure = match cfg.measure.kind {
        crate::assoc::MeasureKind::NrHsic => "HSIC",
        crate::assoc::MeasureKind::PcSquared => "PC",
    };
    let pen = match cfg.penalty.kind {
        PenaltyKind::None => "None",
        PenaltyKind::Lasso => "L1",
        PenaltyKind::Scad { .. } => "SCAD",
        PenaltyKind::Mcp { .. } => "MCP",
    };
    let tag = if cfg.escalate { "SmRMR2" } else { "SmRMR" };
    format!("{tag}({measure}, {pen})")
}

/// One replicate's outcome; the per-replicate CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub dgp: String,
    pub method: String,
    pub seed: u64,
    pub tpr: f64,
    pub fdr: f64,
    pub fpr: f64,
    pub n_selected: usize,
    pub mse: Option<f64>,
    pub acc: Option<f64>,
    pub alpha_used: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub seed: u64,
    pub error: String,
}

/// Mean and standard error (sample sd / √count) of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Some(MetricSummary {
            mean,
            se,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub dgp: DgpSpec,
    pub method: String,
    pub replicates: usize,
    pub failures: Vec<ReplicateFailure>,
    pub tpr: Option<MetricSummary>,
    pub fdr: Option<MetricSummary>,
    pub fpr: Option<MetricSummary>,
    pub n_selected: Option<MetricSummary>,
    pub mse: Option<MetricSummary>,
    pub acc: Option<MetricSummary>,
    pub empty_frequency: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

impl BenchResult {
    fn from_rows(
        dgp: DgpSpec,
        method: String,
        replicates: usize,
        rows: Vec<ReplicateRow>,
        failures: Vec<ReplicateFailure>,
    ) -> Self {
        let col = |f: &dyn Fn(&ReplicateRow) -> Option<f64>| -> Vec<f64> {
            rows.iter().filter_map(f).collect()
        };
        let empties = col(&|r| Some(if r.empty { 1.0 } else { 0.0 }));
        BenchResult {
            dgp,
            method,
            replicates,
            failures,
            tpr: MetricSummary::of(&col(&|r| Some(r.tpr))),
            fdr: MetricSummary::of(&col(&|r| Some(r.fdr))),
            fpr: MetricSummary::of(&col(&|r| Some(r.fpr))),
            n_selected: MetricSummary::of(&col(&|r| Some(r.n_selected as f64))),
            mse: MetricSummary::of(&col(&|r| r.mse)),
            acc: MetricSummary::of(&col(&|r| r.acc)),
            empty_frequency: MetricSummary::of(&empties).map(|s| s.mean),
            rows,
        }
    }
}

fn one_replicate(
    spec: &DgpSpec,
    cfg: &PipelineConfig,
    n_test: usize,
    downstream: bool,
    seed: u64,
    method: &str,
) -> Result<ReplicateRow> {
    let train_spec = DgpSpec { seed, ..*spec };
    let data = generate(&train_spec)?;
    let run_cfg = PipelineConfig {
        seed,
        ..cfg.clone()
    };
    let report = run(&data.x, &data.y, &run_cfg)?;
    let m = score_selection(&report.selected, &data.true_support, spec.p);
    let (mut mse, mut acc) = (None, None);
    if downstream {
        let test = generate(&DgpSpec {
            n: n_test,
            seed: mix_seed(seed, SEED_TEST),
            ..*spec
        })?;
        let score = downstream_fit(
            &data.x,
            &data.y,
            &test.x,
            &test.y,
            &report.selected,
            data.task,
            mix_seed(seed, SEED_DOWNSTREAM),
        )?;
        match data.task {
            Task::Regression => mse = Some(score),
            Task::Classification => acc = Some(score),
        }
    }
    Ok(ReplicateRow {
        dgp: spec.id.to_string(),
        method: method.to_string(),
        seed,
        tpr: m.tpr,
        fdr: m.fdr,
        fpr: m.fpr,
        n_selected: m.n_selected,
        mse,
        acc,
        alpha_used: report.alpha_used,
        empty: report.selected.is_empty(),
    })
}

/// Run `replicates` independent pipeline fits on fresh draws of `spec`.
///
/// Replicate i uses seed mix_seed(spec.seed, i) for the data and the
/// pipeline; its test set (n_test rows, default n) comes from an independent
/// child seed. Replicates run on a pool of `workers` threads (all cores when
/// `None`); results are ordered by replicate index, so the worker count
/// never changes the output. Failed replicates are listed, not fatal.
pub fn fdr_experiment(
    spec: &DgpSpec,
    cfg: &PipelineConfig,
    replicates: usize,
    workers: Option<usize>,
    n_test: Option<usize>,
    downstream: bool,
) -> Result<BenchResult> {
    if replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!(
            "at least {MIN_REPLICATES} replicates are required, got {replicates}"
        )));
    }
    spec.validate()?;
    cfg.validate()?;
    let method = method_label(cfg);
    let n_test = n_test.unwrap_or(spec.n);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<(u64, Result<ReplicateRow>)> = pool.install(|| {
        (0..replicates as u64)
            .into_par_iter()
            .map(|i| {
                let seed = mix_seed(spec.seed, i);
                (seed, one_replicate(spec, cfg, n_test, downstream, seed, &method))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (seed, out) in outcomes {
        match out {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("replicate with seed {seed} failed: {e}");
                failures.push(ReplicateFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(BenchResult::from_rows(*spec, method, replicates, rows, failures))
}

/// Benchmark sweep configuration (the `benchmark` config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dgps: Vec<DgpId>,
    /// (n, p) pairs.
    pub sizes: Vec<(usize, usize)>,
    /// Correlation decay for designs that do not fix it.
    pub c: f64,
    pub poisson_link: PoissonLink,
    pub replicates: usize,
    pub seed: u64,
    /// Test-set size; defaults to the training n.
    pub n_test: Option<usize>,
    pub downstream: bool,
    pub methods: Vec<PipelineConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dgps: vec![DgpId::L1a],
            sizes: DEFAULT_SIZES.to_vec(),
            c: 0.5,
            poisson_link: PoissonLink::default(),
            replicates: MIN_REPLICATES,
            seed: 0,
            n_test: None,
            downstream: true,
            methods: vec![PipelineConfig::default()],
        }
    }
}

/// Every (DGP, size, method) cell of the sweep, in config order. Each cell's
/// master seed is derived from the config seed and the cell index.
pub fn run_benchmark(cfg: &BenchConfig, workers: Option<usize>) -> Result<Vec<BenchResult>> {
    if cfg.methods.is_empty() || cfg.dgps.is_empty() || cfg.sizes.is_empty() {
        return Err(Error::invalid("benchmark needs at least one dgp, size and method"));
    }
    let mut out = Vec::new();
    let mut cell = 0u64;
    for &id in &cfg.dgps {
        for &(n, p) in &cfg.sizes {
            let spec = DgpSpec {
                id,
                n,
                p,
                c: cfg.c,
                seed: mix_seed(cfg.seed, cell),
                poisson_link: cfg.poisson_link,
            };
            spec.validate()?;
            for method in &cfg.methods {
                out.push(fdr_experiment(
                    &spec,
                    method,
                    cfg.replicates,
                    workers,
                    cfg.n_test,
                    cfg.downstream,
                )?);
            }
            cell += 1;
        }
    }
    Ok(out)
}

pub fn write_rows_csv(rows: &[ReplicateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ReplicateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("CSV: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::PenaltySpec;

    fn quick_cfg() -> PipelineConfig {
        PipelineConfig {
            penalty: PenaltySpec::lasso(0.01),
            hp_grid: vec![PenaltySpec::lasso(0.01)],
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn smoke_run_emits_one_row_per_replicate() {
        let spec = DgpSpec::new(DgpId::L1a, 40, 12, 5);
        let r = fdr_experiment(&spec, &quick_cfg(), 10, Some(2), None, true).unwrap();
        assert_eq!(r.rows.len() + r.failures.len(), 10);
        assert_eq!(r.replicates, 10);
        let mean_tpr = r.rows.iter().map(|x| x.tpr).sum::<f64>() / r.rows.len() as f64;
        assert!((r.tpr.unwrap().mean - mean_tpr).abs() < 1e-15);
        assert!(r.rows.iter().all(|x| x.mse.is_some() && x.acc.is_none()));
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let spec = DgpSpec::new(DgpId::L1a, 40, 12, 6);
        let a = fdr_experiment(&spec, &quick_cfg(), 10, Some(1), None, false).unwrap();
        let b = fdr_experiment(&spec, &quick_cfg(), 10, Some(3), None, false).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn too_few_replicates_rejected() {
        let spec = DgpSpec::new(DgpId::L1a, 40, 12, 6);
        assert!(fdr_experiment(&spec, &quick_cfg(), 3, None, None, false).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let spec = DgpSpec::new(DgpId::C3a, 40, 12, 8);
        let cfg = PipelineConfig {
            measure: crate::assoc::MeasureSpec::nr_hsic(),
            ..quick_cfg()
        };
        let r = fdr_experiment(&spec, &cfg, 10, Some(2), None, true).unwrap();
        assert!(r.failures.is_empty());
        assert!(r.rows.iter().all(|x| x.acc.is_some() && x.mse.is_none()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows_csv(&r.rows, &path).unwrap();
        assert_eq!(read_rows_csv(&path).unwrap(), r.rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dgp,method,seed,tpr,fdr,fpr,n_selected,mse,acc,alpha_used,empty"));
    }

    #[test]
    fn pc_on_binary_response_fails_per_replicate() {
        // every angle on a two-valued response is 0, so its self-term vanishes
        let spec = DgpSpec::new(DgpId::C3a, 40, 12, 8);
        let r = fdr_experiment(&spec, &quick_cfg(), 10, Some(2), None, false).unwrap();
        assert_eq!(r.failures.len(), 10);
        assert!(r.tpr.is_none());
    }

    #[test]
    fn labels() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(method_label(&cfg), "SmRMR(PC, MCP)");
        cfg.escalate = true;
        cfg.penalty = PenaltySpec::none();
        assert_eq!(method_label(&cfg), "SmRMR2(PC, None)");
    }
}
