//! The SmRMR quadratic program: relevance vector 𝕁, redundancy matrix 𝑲 and
//! penalized minimization of ½c − θᵀ𝕁 + ½θᵀ𝑲θ + Σ p(λ, θ_k) over θ ≥ 0.

mod cd;
mod lla;

use ndarray::{s, Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{embed, Embedding, MeasureSpec};
use crate::data::{DataMatrix, Sample};
use crate::error::{Error, Result};

pub use cd::{coordinate_descent, signed_coordinate_descent, solve_weighted_l1};
pub use lla::{solve_smrmr, LlaWeight};

/// Entries of θ at or below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// Relevance/redundancy estimates defining one quadratic program.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocSystem {
    relevance: Array1<f64>,
    redundancy: Array2<f64>,
    constant: f64,
    measure: Option<MeasureSpec>,
}

impl AssocSystem {
    /// A system with the single-response constant ½·D̂(Y,Y) = ½.
    pub fn new(relevance: Array1<f64>, redundancy: Array2<f64>) -> Result<Self> {
        let p = relevance.len();
        if redundancy.dim() != (p, p) {
            return Err(Error::invalid(format!(
                "redundancy must be {p}x{p}, got {:?}",
                redundancy.dim()
            )));
        }
        if relevance.iter().chain(redundancy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("system entries must be finite"));
        }
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (redundancy[[i, j]], redundancy[[j, i]]);
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!(
                        "redundancy is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(AssocSystem {
            relevance,
            redundancy,
            constant: 0.5,
            measure: None,
        })
    }

    /// Replace the constant term of the loss.
    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn dim(&self) -> usize {
        self.relevance.len()
    }

    pub fn relevance(&self) -> &Array1<f64> {
        &self.relevance
    }

    pub fn redundancy(&self) -> &Array2<f64> {
        &self.redundancy
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn measure(&self) -> Option<&MeasureSpec> {
        self.measure.as_ref()
    }

    /// Sub-system on the given indices.
    pub fn restrict(&self, idx: &[usize]) -> AssocSystem {
        AssocSystem {
            relevance: idx.iter().map(|&k| self.relevance[k]).collect(),
            redundancy: Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| {
                self.redundancy[[idx[a], idx[b]]]
            }),
            constant: self.constant,
            measure: self.measure,
        }
    }

    /// Unpenalized loss c − θᵀ𝕁 + ½θᵀ𝑲θ.
    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!(
                "theta has length {}, system has {}",
                theta.len(),
                self.dim()
            )));
        }
        if let Some(k) = theta.iter().position(|&t| !(t >= 0.0)) {
            return Err(Error::invalid(format!(
                "theta must be non-negative; entry {k} is {}",
                theta[k]
            )));
        }
        Ok(self.loss_unchecked(theta))
    }

    pub(crate) fn loss_unchecked(&self, theta: &[f64]) -> f64 {
        let p = self.dim();
        let mut lin = 0.0;
        let mut quad = 0.0;
        for k in 0..p {
            if theta[k] == 0.0 {
                continue;
            }
            lin += theta[k] * self.relevance[k];
            let row = self.redundancy.row(k);
            let mut acc = 0.0;
            for l in 0..p {
                acc += row[l] * theta[l];
            }
            quad += theta[k] * acc;
        }
        self.constant - lin + 0.5 * quad
    }
}

/// (1/2)·D̂(Y,Y) − θᵀ𝕁 + (1/2)θᵀ𝑲θ.
pub fn loss_value(sys: &AssocSystem, theta: &Array1<f64>) -> Result<f64> {
    sys.loss(theta.as_slice().expect("contiguous"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    NotConverged,
}

/// Non-negative solution of one SmRMR problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub theta: Array1<f64>,
    /// Indices with θ_k > [`ZERO_TOL`].
    pub support: Vec<usize>,
    /// Loss plus penalty at θ.
    pub objective: f64,
    pub status: SolveStatus,
    /// Penalized objective after every coordinate-descent sweep, when
    /// [`SolverConfig::record_trace`] is set.
    pub sweep_trace: Vec<f64>,
    /// Penalized objective at the Lasso start and after every LLA round.
    pub lla_trace: Vec<f64>,
}

impl Coefficients {
    pub(crate) fn from_theta(theta: Array1<f64>, objective: f64, status: SolveStatus) -> Self {
        let support = support_of(&theta);
        Coefficients {
            theta,
            support,
            objective,
            status,
            sweep_trace: Vec::new(),
            lla_trace: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

pub(crate) fn support_of(theta: &Array1<f64>) -> Vec<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > ZERO_TOL)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_cd_iters: usize,
    /// Sup-norm coordinate change that ends coordinate descent.
    pub cd_tol: f64,
    pub lla_m: usize,
    /// L2 change between LLA rounds that ends the outer loop early.
    pub lla_eps: f64,
    pub lla_weight: LlaWeight,
    /// Re-solve the active set exactly after coordinate descent.
    pub polish: bool,
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_cd_iters: 10_000,
            cd_tol: 1e-7,
            lla_m: 2,
            lla_eps: 1e-6,
            lla_weight: LlaWeight::Derivative,
            polish: true,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_cd_iters == 0 || self.lla_m == 0 {
            return Err(Error::invalid("max_cd_iters and lla_m must be at least 1"));
        }
        if !(self.cd_tol > 0.0 && self.lla_eps > 0.0) {
            return Err(Error::invalid("cd_tol and lla_eps must be positive"));
        }
        Ok(())
    }
}

/// Embed every column, attaching the column index to degenerate failures.
pub(crate) fn embed_columns(x: &DataMatrix, measure: &MeasureSpec) -> Result<Vec<Embedding>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|k| {
            let col = x.column(k)?;
            embed(&col, measure).map_err(|e| e.with_column(k))
        })
        .collect()
}

fn system_from_embeddings(
    cols: &[Embedding],
    target: &Embedding,
    measure: &MeasureSpec,
) -> Result<AssocSystem> {
    let p = cols.len();
    let relevance: Vec<f64> = cols
        .par_iter()
        .map(|e| e.dependence(target))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|k| ((k + 1)..p).map(move |l| (k, l)))
        .collect();
    let off: Vec<f64> = pairs
        .par_iter()
        .map(|&(k, l)| cols[k].dependence(&cols[l]))
        .collect::<Result<_>>()?;
    let mut redundancy = Array2::<f64>::eye(p);
    for (&(k, l), &v) in pairs.iter().zip(&off) {
        redundancy[[k, l]] = v;
        redundancy[[l, k]] = v;
    }
    let mut sys = AssocSystem::new(Array1::from(relevance), redundancy)?;
    sys.measure = Some(*measure);
    Ok(sys)
}

/// 𝕁_k = D̂(X_k, Y), 𝑲_kl = D̂(X_k, X_l); one embedding per column.
pub fn build_system(x: &DataMatrix, y: &Sample, measure: &MeasureSpec) -> Result<AssocSystem> {
    check_shapes(x, y)?;
    measure.validate()?;
    let target = embed(y, measure).map_err(|e| match e {
        Error::DegenerateFeature { reason, .. } => {
            Error::degenerate(None, format!("response: {reason}"))
        }
        other => other,
    })?;
    let cols = embed_columns(x, measure)?;
    system_from_embeddings(&cols, &target, measure)
}

/// Marginal D̂(X_k, Y) for every column; degenerate columns yield `None`.
pub fn marginal_relevance(
    x: &DataMatrix,
    y: &Sample,
    measure: &MeasureSpec,
) -> Result<Vec<Option<f64>>> {
    check_shapes(x, y)?;
    measure.validate()?;
    let target = embed(y, measure)?;
    (0..x.ncols())
        .into_par_iter()
        .map(|k| {
            let col = x.column(k)?;
            match embed(&col, measure) {
                Ok(e) => e.dependence(&target).map(Some),
                Err(Error::DegenerateFeature { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// System for the joint original + knockoff loss: relevance stacked,
/// redundancy block-diagonal with no cross terms, and constant 0.
pub fn build_joint_system(
    x: &DataMatrix,
    xk: &DataMatrix,
    y: &Sample,
    measure: &MeasureSpec,
) -> Result<AssocSystem> {
    if x.nrows() != xk.nrows() || x.ncols() != xk.ncols() {
        return Err(Error::invalid(format!(
            "original is {}x{} but knockoffs are {}x{}",
            x.nrows(),
            x.ncols(),
            xk.nrows(),
            xk.ncols()
        )));
    }
    let p = x.ncols();
    let a = build_system(x, y, measure)?;
    let b = build_system(xk, y, measure).map_err(|e| match e {
        Error::DegenerateFeature {
            column: Some(c),
            reason,
        } => Error::degenerate(Some(c), format!("knockoff copy: {reason}")),
        other => other,
    })?;
    let mut relevance = Array1::zeros(2 * p);
    relevance.slice_mut(s![..p]).assign(&a.relevance);
    relevance.slice_mut(s![p..]).assign(&b.relevance);
    let mut redundancy = Array2::zeros((2 * p, 2 * p));
    redundancy.slice_mut(s![..p, ..p]).assign(&a.redundancy);
    redundancy.slice_mut(s![p.., p..]).assign(&b.redundancy);
    Ok(AssocSystem {
        relevance,
        redundancy,
        constant: 0.0,
        measure: Some(*measure),
    })
}

fn check_shapes(x: &DataMatrix, y: &Sample) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 3 {
        return Err(Error::SampleTooSmall(format!(
            "need at least 3 observations, got {}",
            x.nrows()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::{dependence, hsic};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_data(n: usize, p: usize, seed: u64) -> (DataMatrix, Sample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (0..n)
            .map(|i| x[[i, 0]] + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        (DataMatrix::new(x).unwrap(), Sample::from_vec(y).unwrap())
    }

    #[test]
    fn system_matches_pairwise_calls() {
        let (x, y) = random_data(6, 3, 11);
        for m in [MeasureSpec::nr_hsic(), MeasureSpec::pc()] {
            let sys = build_system(&x, &y, &m).unwrap();
            for k in 0..3 {
                let xk = x.column(k).unwrap();
                let want = dependence(&xk, &y, &m).unwrap();
                assert!((sys.relevance()[k] - want).abs() < 1e-12);
                for l in 0..3 {
                    let want = dependence(&xk, &x.column(l).unwrap(), &m).unwrap();
                    assert!((sys.redundancy()[[k, l]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn response_equal_to_column_has_unit_relevance() {
        let (x, _) = random_data(20, 2, 1);
        let y = x.column(1).unwrap();
        let sys = build_system(&x, &y, &MeasureSpec::nr_hsic()).unwrap();
        assert!((sys.relevance()[1] - 1.0).abs() < 1e-12);
        let one = build_system(&x.select_columns(&[0]), &y, &MeasureSpec::pc()).unwrap();
        assert_eq!(one.redundancy(), &array![[1.0]]);
    }

    #[test]
    fn degenerate_column_is_named() {
        let (x, y) = random_data(10, 3, 2);
        let mut raw = x.into_inner();
        raw.column_mut(2).fill(4.0);
        let err = build_system(&DataMatrix::new(raw).unwrap(), &y, &MeasureSpec::pc()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFeature { column: Some(2), .. }));
    }

    #[test]
    fn loss_examples() {
        let sys = AssocSystem::new(array![0.6], array![[1.0]]).unwrap();
        assert_eq!(sys.loss(&[0.0]).unwrap(), 0.5);
        assert!((sys.loss(&[0.6]).unwrap() - (1.0 - 0.36) / 2.0).abs() < 1e-15);
        assert!(sys.loss(&[-0.1]).is_err());
    }

    #[test]
    fn hsic_loss_equals_frobenius_residual() {
        let (x, y) = random_data(15, 3, 5);
        let m = MeasureSpec::nr_hsic();
        let sys = build_system(&x, &y, &m).unwrap();
        let unit = |s: &Sample| {
            let g = hsic::center_gram(
                &hsic::gaussian_kernel_matrix(s, hsic::median_heuristic_bandwidth(s).unwrap()).unwrap(),
            );
            g.entries() / g.frob()
        };
        let n = 15.0;
        let ly = unit(&y) * n;
        let ks: Vec<Array2<f64>> = (0..3).map(|k| unit(&x.column(k).unwrap()) * n).collect();
        for theta in [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [1.2, 0.5, 0.7]] {
            let mut resid = ly.clone();
            for k in 0..3 {
                resid = resid - &ks[k] * theta[k];
            }
            let frob = resid.iter().map(|v| v * v).sum::<f64>() / (2.0 * n * n);
            assert!((sys.loss(&theta).unwrap() - frob).abs() < 1e-8);
        }
    }

    #[test]
    fn joint_system_is_block_diagonal() {
        let (x, y) = random_data(8, 2, 9);
        let (xk, _) = random_data(8, 2, 10);
        let m = MeasureSpec::pc();
        let joint = build_joint_system(&x, &xk, &y, &m).unwrap();
        let a = build_system(&x, &y, &m).unwrap();
        let b = build_system(&xk, &y, &m).unwrap();
        assert_eq!(joint.constant(), 0.0);
        for k in 0..2 {
            assert_eq!(joint.relevance()[k], a.relevance()[k]);
            assert_eq!(joint.relevance()[k + 2], b.relevance()[k]);
            for l in 0..2 {
                assert_eq!(joint.redundancy()[[k, l + 2]], 0.0);
                assert_eq!(joint.redundancy()[[k + 2, l]], 0.0);
                assert_eq!(joint.redundancy()[[k, l]], a.redundancy()[[k, l]]);
                assert_eq!(joint.redundancy()[[k + 2, l + 2]], b.redundancy()[[k, l]]);
            }
        }
        let same = build_joint_system(&x, &x, &y, &m).unwrap();
        assert_eq!(
            same.redundancy().slice(s![..2, ..2]),
            same.redundancy().slice(s![2.., 2..])
        );
        assert!(build_joint_system(&x, &xk.select_columns(&[0]), &y, &m).is_err());
    }
}
