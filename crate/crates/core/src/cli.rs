//! Command-line front end: `select`, `simulate`, `benchmark` and `diagnose`.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure (or every benchmark replicate failing).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::assoc::MeasureKind;
use crate::bench::{run_benchmark, write_rows_csv, BenchConfig, BenchResult, MetricSummary};
use crate::dgp::{generate, DgpId, DgpSpec, PoissonLink};
use crate::error::{Error, Result};
use crate::io::{config_from_toml, read_table, read_text, selection_table, write_report, write_simulation};
use crate::knockoff::KnockoffReport;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::pipeline::{run as run_pipeline, run_detailed, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SMRMR_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "smrmr", version, about = "Sparse mRMR feature screening with knockoff FDR control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen and select features from a CSV table; writes a JSON report.
    Select(SelectArgs),
    /// Draw a synthetic dataset and write it as CSV plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo benchmark sweep.
    Benchmark(BenchmarkArgs),
    /// Run the pipeline and print screening, tuning and knockoff diagnostics.
    Diagnose(DiagnoseArgs),
}

/// Data input and pipeline overrides shared by `select` and `diagnose`.
/// Overrides left unset fall back to the config file, then to the built-in
/// defaults shown.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// CSV table with a header row
    pub data: PathBuf,
    /// Name of the response column
    #[arg(long, default_value = "y")]
    pub response: String,
    /// TOML config file with pipeline settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target FDR level [default: 0.3]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dependence measure: pc or nr_hsic [default: pc]
    #[arg(long)]
    pub measure: Option<String>,
    /// Penalty family: none, l1, scad or mcp [default: mcp]
    #[arg(long)]
    pub penalty: Option<String>,
    /// Raise alpha in steps of 0.05 until something is selected [default: false]
    #[arg(long)]
    pub escalate: bool,
    /// Random seed; drawn from system entropy and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Where to write the JSON report
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Also write the diagnostics as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design id (1a-1d, 2a-2c, 3a-3c)
    #[arg(long)]
    pub dgp: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    /// Correlation decay, for designs that do not fix it
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    /// Random seed; drawn from system entropy and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Link for design 2c: identity_clamped or exp
    #[arg(long, default_value = "identity_clamped")]
    pub poisson_link: String,
    /// Output file prefix (may include a directory)
    #[arg(long, default_value = "")]
    pub out_prefix: String,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// TOML benchmark config (dgps, sizes, methods, ...)
    #[arg(long)]
    pub config: PathBuf,
    /// Replicates per cell; overrides the config
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Master seed; overrides the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for replicates.csv and summary.json
    #[arg(long, default_value = "bench_out")]
    pub out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::NumericalFailure(_) | Error::ResourceLimit(_) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

/// Parse `args` (program name first), run the subcommand and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let out = match cli.command {
        Command::Select(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Config file (if any) with command-line overrides applied. The seed comes
/// from --seed, else the config file, else system entropy.
pub fn build_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    let (mut cfg, file_seed) = match &a.config {
        Some(path) => {
            let text = read_text(path)?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
            let cfg = config_from_toml(&text)?;
            let seed = table.contains_key("seed").then_some(cfg.seed);
            (cfg, seed)
        }
        None => (PipelineConfig::default(), None),
    };
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    if let Some(m) = &a.measure {
        cfg.measure.kind = m.parse::<MeasureKind>()?;
    }
    if let Some(name) = &a.penalty {
        let kind = PenaltyKind::from_name(name)?;
        cfg.penalty = PenaltySpec { kind, ..cfg.penalty };
        for h in &mut cfg.hp_grid {
            h.kind = kind;
        }
    }
    if a.escalate {
        cfg.escalate = true;
    }
    cfg.seed = resolve_seed(a.seed.or(file_seed));
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_select(a: &SelectArgs) -> Result<i32> {
    let cfg = build_config(&a.pipeline)?;
    let table = read_table(&a.pipeline.data, &a.pipeline.response)?;
    let report = with_workers(a.pipeline.workers, || run_pipeline(&table.x, &table.y, &cfg))??;
    write_report(&report, &a.out)?;
    print!("{}", selection_table(&report, &table.feature_names));
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let id: DgpId = a.dgp.parse()?;
    let link: PoissonLink = serde_json::from_value(serde_json::Value::String(a.poisson_link.clone()))
        .map_err(|_| {
            Error::invalid(format!(
                "unknown Poisson link '{}' (expected identity_clamped or exp)",
                a.poisson_link
            ))
        })?;
    let spec = DgpSpec {
        id,
        n: a.n,
        p: a.p,
        c: a.c,
        seed: resolve_seed(a.seed),
        poisson_link: link,
    };
    let ds = generate(&spec)?;
    let files = write_simulation(&ds, &spec, &a.out_prefix)?;
    println!(
        "wrote {}, {}, {} and {} (true support {:?})",
        files.x.display(),
        files.y.display(),
        files.meta.display(),
        files.data.display(),
        ds.true_support
    );
    Ok(EXIT_OK)
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<i32> {
    let mut cfg: BenchConfig = toml::from_str(&read_text(&a.config)?)
        .map_err(|e| Error::Parse(format!("benchmark config: {e}")))?;
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    for m in &cfg.methods {
        m.validate()?;
    }
    let results = run_benchmark(&cfg, a.workers)?;
    fs::create_dir_all(&a.out)?;
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    write_rows_csv(&rows, &a.out.join("replicates.csv"))?;
    let mut summary = serde_json::to_string_pretty(&results).expect("summary serializes");
    summary.push('\n');
    fs::write(a.out.join("summary.json"), summary)?;
    print!("{}", summary_table(&results));
    let failed: usize = results.iter().map(|r| r.failures.len()).sum();
    if failed > 0 {
        eprintln!("{failed} replicate(s) failed; see summary.json");
    }
    Ok(if rows.is_empty() { EXIT_NUMERICAL } else { EXIT_OK })
}

fn summary_table(results: &[BenchResult]) -> String {
    let fmt = |m: &Option<MetricSummary>| match m {
        Some(s) => format!("{:.3} ({:.3})", s.mean, s.se),
        None => "-".to_string(),
    };
    let mut out = format!(
        "{:<4} {:>5} {:>6}  {:<20} {:>15} {:>15} {:>15} {:>6} {:>5}\n",
        "dgp", "n", "p", "method", "tpr", "fdr", "mse/acc", "empty", "fail"
    );
    for r in results {
        let down = if r.mse.is_some() { &r.mse } else { &r.acc };
        out.push_str(&format!(
            "{:<4} {:>5} {:>6}  {:<20} {:>15} {:>15} {:>15} {:>6} {:>5}\n",
            r.dgp.id.as_str(),
            r.dgp.n,
            r.dgp.p,
            r.method,
            fmt(&r.tpr),
            fmt(&r.fdr),
            fmt(down),
            r.empty_frequency.map(|e| format!("{e:.2}")).unwrap_or_else(|| "-".into()),
            r.failures.len()
        ));
    }
    out
}

/// Everything `diagnose` reports, in original column coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Whether the data were split (and the screening rows recycled).
    pub split: bool,
    pub p_max: usize,
    pub prescreened: Vec<usize>,
    pub screened: Vec<usize>,
    pub joint_rows: usize,
    pub tuning: Vec<TuningPoint>,
    pub chosen_penalty: PenaltySpec,
    pub positive_w: usize,
    pub negative_w: usize,
    pub report: KnockoffReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuningPoint {
    pub penalty: PenaltySpec,
    pub validation_loss: f64,
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<i32> {
    let cfg = build_config(&a.pipeline)?;
    let table = read_table(&a.pipeline.data, &a.pipeline.response)?;
    let d = with_workers(a.pipeline.workers, || run_detailed(&table.x, &table.y, &cfg))??;
    let screened_w: Vec<f64> = d.s0.iter().map(|&k| d.report.w[k]).collect();
    let diag = Diagnostics {
        n: table.x.nrows(),
        p: table.x.ncols(),
        seed: cfg.seed,
        split: d.dr,
        p_max: d.p_max,
        prescreened: d.s0b.clone(),
        screened: d.s0.clone(),
        joint_rows: d.joint_rows,
        tuning: d
            .tuning
            .iter()
            .map(|&(penalty, validation_loss)| TuningPoint {
                penalty,
                validation_loss,
            })
            .collect(),
        chosen_penalty: d.penalty,
        positive_w: screened_w.iter().filter(|&&w| w > 0.0).count(),
        negative_w: screened_w.iter().filter(|&&w| w < 0.0).count(),
        report: d.report,
    };
    print!("{}", diagnostics_text(&diag, &table.feature_names));
    if let Some(path) = &a.out {
        write_json(&diag, path)?;
    }
    Ok(EXIT_OK)
}

fn diagnostics_text(d: &Diagnostics, names: &[String]) -> String {
    let mut out = format!("data: n = {}, p = {}, seed = {}\n", d.n, d.p, d.seed);
    if d.split {
        out.push_str(&format!(
            "screening: split, {} prescreened, {} kept (p_max = {})\n",
            d.prescreened.len(),
            d.screened.len(),
            d.p_max
        ));
    } else {
        out.push_str("screening: skipped (n >= 2p), all features kept\n");
    }
    out.push_str(&format!("joint design rows: {}\n", d.joint_rows));
    out.push_str("tuning (validation loss):\n");
    for t in &d.tuning {
        out.push_str(&format!("  {:<28} {:.6}\n", t.penalty, t.validation_loss));
    }
    out.push_str(&format!("chosen: {}\n", d.chosen_penalty));
    out.push_str(&format!(
        "knockoff statistics: {} positive, {} negative\n",
        d.positive_w, d.negative_w
    ));
    let mut ranked = d.screened.clone();
    ranked.sort_by(|&a, &b| d.report.w[b].abs().total_cmp(&d.report.w[a].abs()).then(a.cmp(&b)));
    out.push_str("largest |W|:\n");
    for &k in ranked.iter().take(10) {
        let name = names.get(k).map(String::as_str).unwrap_or("?");
        out.push_str(&format!("  {k:>6}  {name:<20} {:>12.6}\n", d.report.w[k]));
    }
    out.push_str(&selection_table(&d.report, names));
    out
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("diagnostics serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
