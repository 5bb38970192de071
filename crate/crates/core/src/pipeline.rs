//! End-to-end selection: screening, knockoff construction with data
//! recycling, penalty tuning on held-out rows, and knockoff+ selection.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::MeasureSpec;
use crate::data::{DataMatrix, Sample};
use crate::error::{Error, Result, Stage};
use crate::knockoff::{sample_knockoffs, scores_from_theta, select, KnockoffReport};
use crate::numeric::mix_seed;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::solver::{build_joint_system, build_system, marginal_relevance, solve_smrmr, SolverConfig};

/// Smallest sample the pipeline accepts.
pub const MIN_SAMPLES: usize = 10;
/// λ values of the default tuning grid.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.001, 0.005, 0.01, 0.05, 0.1];
/// Relative size of the marginal pre-screen compared with the final screen.
pub const PRESCREEN_FACTOR: usize = 4;

// child-seed streams derived from the pipeline seed
const SEED_SPLIT: u64 = 1;
const SEED_KNOCKOFF: u64 = 2;
const SEED_TUNE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub measure: MeasureSpec,
    /// Penalty family (and fallback λ) for screening, tuning and the final fit.
    pub penalty: PenaltySpec,
    pub alpha: f64,
    pub escalate: bool,
    /// Fraction of rows used for screening when n < 2p.
    pub split_frac: f64,
    pub lambda_screen: f64,
    /// Tuning candidates. Empty means the default λ grid in the family of
    /// `penalty`.
    pub hp_grid: Vec<PenaltySpec>,
    /// Share of stage-two rows held out when tuning.
    pub validation_frac: f64,
    /// Override for the number of features kept by screening.
    pub p_max: Option<usize>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            measure: MeasureSpec::default(),
            penalty: PenaltySpec::default(),
            alpha: 0.3,
            escalate: false,
            split_frac: 0.4,
            lambda_screen: 0.01,
            hp_grid: Vec::new(),
            validation_frac: 0.2,
            p_max: None,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.measure.validate()?;
        self.penalty.validate()?;
        self.solver.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::invalid(format!(
                "split_frac must lie in (0, 1), got {}",
                self.split_frac
            )));
        }
        if !(self.validation_frac > 0.0 && self.validation_frac < 1.0) {
            return Err(Error::invalid(format!(
                "validation_frac must lie in (0, 1), got {}",
                self.validation_frac
            )));
        }
        if !(self.lambda_screen > 0.0 && self.lambda_screen.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_screen must be positive, got {}",
                self.lambda_screen
            )));
        }
        if self.p_max == Some(0) {
            return Err(Error::invalid("p_max must be at least 1"));
        }
        for h in &self.hp_grid {
            h.validate()?;
        }
        Ok(())
    }

    /// The tuning candidates actually searched.
    pub fn effective_grid(&self) -> Vec<PenaltySpec> {
        if !self.hp_grid.is_empty() {
            return self.hp_grid.clone();
        }
        match self.penalty.kind {
            PenaltyKind::None => vec![self.penalty],
            _ => DEFAULT_LAMBDA_GRID
                .iter()
                .map(|&l| self.penalty.with_lambda(l))
                .collect(),
        }
    }
}

/// Result of the screening stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutput {
    /// Retained features (original column indices, ascending).
    pub s0: Vec<usize>,
    /// Marginal pre-screen (original indices, ascending); equals `s0` when no
    /// split happened.
    pub s0b: Vec<usize>,
    /// True when n < 2p forced a split and the first split is recycled.
    pub dr: bool,
    /// Rows used to build knockoffs (second split, or all rows).
    pub x1: DataMatrix,
    pub y1: Sample,
    /// First split, present when `dr`.
    pub x0: Option<DataMatrix>,
    pub y0: Option<Sample>,
    pub p_max: usize,
}

fn shuffled_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    rows
}

fn constant_columns(x: &DataMatrix) -> Vec<usize> {
    let v = x.view();
    (0..x.ncols())
        .filter(|&k| {
            let c = v.column(k);
            c.iter().all(|&e| e == c[0])
        })
        .collect()
}

/// Reduce the feature set to at most p_max columns.
pub fn screen(x: &DataMatrix, y: &Sample, cfg: &PipelineConfig) -> Result<ScreenOutput> {
    let (n, p) = (x.nrows(), x.ncols());
    if n != y.len() {
        return Err(Error::invalid(format!("design has {n} rows but response has {}", y.len())));
    }
    if p == 0 {
        return Err(Error::invalid("design has no columns"));
    }
    if n < MIN_SAMPLES {
        return Err(Error::SampleTooSmall(format!(
            "need at least {MIN_SAMPLES} observations, got {n}"
        )));
    }
    let dropped = constant_columns(x);
    if !dropped.is_empty() {
        log::warn!("dropping constant columns {dropped:?}");
    }
    let usable: Vec<usize> = (0..p).filter(|k| !dropped.contains(k)).collect();
    if usable.is_empty() {
        return Err(Error::degenerate(None, "every column is constant"));
    }
    if n >= 2 * p {
        return Ok(ScreenOutput {
            s0: usable.clone(),
            s0b: usable,
            dr: false,
            x1: x.clone(),
            y1: y.clone(),
            x0: None,
            y0: None,
            p_max: p,
        });
    }

    let n0 = (cfg.split_frac * n as f64).floor() as usize;
    let n1 = n - n0;
    if n0 < 3 || n1 < 3 {
        return Err(Error::SampleTooSmall(format!(
            "split of {n} rows into {n0} + {n1} leaves too few rows"
        )));
    }
    let p_max = match cfg.p_max {
        Some(m) => {
            if 2 * m >= n1 {
                return Err(Error::invalid(format!(
                    "p_max = {m} needs 2·p_max < n1 = {n1}"
                )));
            }
            m
        }
        None => (n1 - 1) / 2,
    };
    if p_max < 1 {
        return Err(Error::SampleTooSmall(format!(
            "second split of {n1} rows cannot support any feature"
        )));
    }
    let rows = shuffled_rows(n, mix_seed(cfg.seed, SEED_SPLIT));
    let (r0, r1) = rows.split_at(n0);
    let x0 = x.select_rows(r0);
    let y0 = y.select(r0)?;

    let marginal = marginal_relevance(&x0.select_columns(&usable), &y0, &cfg.measure)
        .map_err(|e| match e {
            Error::DegenerateFeature { reason, .. } => {
                Error::degenerate(None, format!("response on the screening split: {reason}"))
            }
            other => other,
        })?;
    let mut scored: Vec<(usize, f64)> = usable
        .iter()
        .zip(&marginal)
        .filter_map(|(&k, d)| d.map(|d| (k, d)))
        .collect();
    if scored.len() < usable.len() {
        log::warn!(
            "{} columns are constant on the screening split and were dropped",
            usable.len() - scored.len()
        );
    }
    if scored.is_empty() {
        return Err(Error::degenerate(None, "no column varies on the screening split"));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate((PRESCREEN_FACTOR * p_max).min(p));
    let s0b_ranked: Vec<usize> = scored.iter().map(|(k, _)| *k).collect();

    let sys = build_system(&x0.select_columns(&s0b_ranked), &y0, &cfg.measure)
        .map_err(|e| remap_column(e, &s0b_ranked))?;
    let pen = cfg.penalty.with_lambda(match cfg.penalty.kind {
        PenaltyKind::None => 0.0,
        _ => cfg.lambda_screen,
    });
    let theta = solve_smrmr(&sys, &pen, &cfg.solver)?.theta;
    let mut order: Vec<usize> = (0..s0b_ranked.len()).collect();
    // marginal scores are already descending in s0b_ranked order, so
    // position breaks θ ties by marginal score and then by index
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut s0: Vec<usize> = order.iter().take(p_max).map(|&i| s0b_ranked[i]).collect();
    s0.sort_unstable();
    let mut s0b = s0b_ranked;
    s0b.sort_unstable();

    Ok(ScreenOutput {
        s0,
        s0b,
        dr: true,
        x1: x.select_rows(r1),
        y1: y.select(r1)?,
        x0: Some(x0),
        y0: Some(y0),
        p_max,
    })
}

fn remap_column(e: Error, cols: &[usize]) -> Error {
    match e {
        Error::DegenerateFeature {
            column: Some(c),
            reason,
        } if c < cols.len() => Error::degenerate(Some(cols[c]), reason),
        other => other,
    }
}

/// Original and knockoff blocks for the selection fit, restricted to Ŝ₀.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDesign {
    pub x: DataMatrix,
    pub xk: DataMatrix,
    pub y: Sample,
    /// Number of leading recycled rows (identical in both blocks).
    pub recycled: usize,
}

impl JointDesign {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    fn rows(&self, idx: &[usize]) -> Result<JointDesign> {
        Ok(JointDesign {
            x: self.x.select_rows(idx),
            xk: self.xk.select_rows(idx),
            y: self.y.select(idx)?,
            recycled: 0,
        })
    }
}

/// Sample knockoffs on the second split and, when recycling, prepend the
/// first split to both blocks.
pub fn joint_design(scr: &ScreenOutput, cfg: &PipelineConfig) -> Result<JointDesign> {
    let x1 = scr.x1.select_columns(&scr.s0);
    if scr.dr && 2 * scr.s0.len() >= x1.nrows() {
        return Err(Error::SampleTooSmall(format!(
            "{} features need more than {} knockoff rows",
            scr.s0.len(),
            2 * scr.s0.len()
        )));
    }
    let ko = sample_knockoffs(&x1, mix_seed(cfg.seed, SEED_KNOCKOFF))
        .map_err(|e| remap_column(e, &scr.s0))?;
    match (&scr.x0, &scr.y0) {
        (Some(x0), Some(y0)) if scr.dr => {
            let x0 = x0.select_columns(&scr.s0);
            Ok(JointDesign {
                x: x0.vstack(&x1)?,
                xk: x0.vstack(&ko.xk)?,
                y: y0.concat(&scr.y1),
                recycled: x0.nrows(),
            })
        }
        _ => Ok(JointDesign {
            x: x1,
            xk: ko.xk,
            y: scr.y1.clone(),
            recycled: 0,
        }),
    }
}

/// Validation loss of every tuning candidate, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub chosen: PenaltySpec,
    pub losses: Vec<(PenaltySpec, f64)>,
}

/// Pick the candidate whose joint fit on 80% of the rows has the smallest
/// unpenalized joint loss on the other 20%; ties go to the larger λ.
pub fn tune(design: &JointDesign, cfg: &PipelineConfig) -> Result<TuneOutcome> {
    let grid = cfg.effective_grid();
    if grid.len() == 1 {
        return Ok(TuneOutcome {
            chosen: grid[0],
            losses: Vec::new(),
        });
    }
    let n = design.nrows();
    let n_val = ((cfg.validation_frac * n as f64).round() as usize).clamp(3, n.saturating_sub(3));
    if n < 6 {
        return Err(Error::SampleTooSmall(format!("{n} rows are too few to tune on")));
    }
    let rows = shuffled_rows(n, mix_seed(cfg.seed, SEED_TUNE));
    let (val_rows, train_rows) = rows.split_at(n_val);
    let train = design.rows(train_rows)?;
    let val = design.rows(val_rows)?;
    let train_sys = build_joint_system(&train.x, &train.xk, &train.y, &cfg.measure)?;
    let val_sys = build_joint_system(&val.x, &val.xk, &val.y, &cfg.measure)?;
    let losses: Vec<(PenaltySpec, f64)> = grid
        .par_iter()
        .map(|h| {
            let c = solve_smrmr(&train_sys, h, &cfg.solver)?;
            let g = val_sys.loss(c.theta.as_slice().expect("contiguous"))?;
            Ok((*h, g))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (h, g)) in losses.iter().enumerate().skip(1) {
        let (bh, bg) = losses[best];
        if *g < bg - 1e-12 || ((*g - bg).abs() <= 1e-12 && h.lambda > bh.lambda) {
            best = i;
        }
    }
    Ok(TuneOutcome {
        chosen: losses[best].0,
        losses,
    })
}

/// Fit the joint problem with `penalty` and apply the knockoff+ rule.
/// Scores and selections are in Ŝ₀ coordinates.
pub fn knockoff_stage(
    design: &JointDesign,
    penalty: &PenaltySpec,
    cfg: &PipelineConfig,
) -> Result<KnockoffReport> {
    let sys = build_joint_system(&design.x, &design.xk, &design.y, &cfg.measure)?;
    let coef = solve_smrmr(&sys, penalty, &cfg.solver)?;
    let w = scores_from_theta(&coef.theta)?;
    select(w.as_slice().expect("contiguous"), cfg.alpha, cfg.escalate)
}

/// Everything a run produced, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDetails {
    /// Final report in original column coordinates.
    pub report: KnockoffReport,
    pub s0: Vec<usize>,
    pub s0b: Vec<usize>,
    pub dr: bool,
    pub p_max: usize,
    pub penalty: PenaltySpec,
    pub tuning: Vec<(PenaltySpec, f64)>,
    pub joint_rows: usize,
}

/// Full pipeline. Selected indices and scores refer to the original columns;
/// features removed by screening score 0.
pub fn run(x: &DataMatrix, y: &Sample, cfg: &PipelineConfig) -> Result<KnockoffReport> {
    run_detailed(x, y, cfg).map(|d| d.report)
}

pub fn run_detailed(x: &DataMatrix, y: &Sample, cfg: &PipelineConfig) -> Result<RunDetails> {
    cfg.validate()?;
    let scr = screen(x, y, cfg).map_err(|e| e.in_stage(Stage::Screen))?;
    let design = joint_design(&scr, cfg).map_err(|e| e.in_stage(Stage::Knockoff))?;
    let tuned = tune(&design, cfg).map_err(|e| e.in_stage(Stage::Tune))?;
    let local = knockoff_stage(&design, &tuned.chosen, cfg)
        .map_err(|e| remap_column(e, &scr.s0).in_stage(Stage::Knockoff))?;

    let mut w = Array1::<f64>::zeros(x.ncols());
    for (j, &k) in scr.s0.iter().enumerate() {
        w[k] = local.w[j];
    }
    let report = KnockoffReport {
        w: w.to_vec(),
        threshold: local.threshold,
        selected: local.selected.iter().map(|&j| scr.s0[j]).collect(),
        fdp_hat: local.fdp_hat,
        alpha_used: local.alpha_used,
    };
    Ok(RunDetails {
        report,
        s0: scr.s0,
        s0b: scr.s0b,
        dr: scr.dr,
        p_max: scr.p_max,
        penalty: tuned.chosen,
        tuning: tuned.losses,
        joint_rows: design.nrows(),
    })
}
