//! Second-order Gaussian knockoffs, importance scores and the knockoff+
//! selection rule.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::numeric::{from_nalgebra, min_eigenvalue, symmetric_eigen, to_nalgebra};
use crate::solver::Coefficients;

/// Smallest eigenvalue the shrunk correlation matrix is allowed to have.
pub const MIN_EIGENVALUE: f64 = 1e-6;

/// Escalation step for the target FDR level when nothing is selected.
pub const ALPHA_STEP: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct KnockoffMatrix {
    pub xk: DataMatrix,
    /// Equicorrelation parameters on the correlation scale.
    pub s_vec: Array1<f64>,
    pub mu_hat: Array1<f64>,
    /// Estimated covariance after shrinkage.
    pub sigma_hat: Array2<f64>,
    /// Weight put on the identity when shrinking the correlation matrix.
    pub shrinkage: f64,
}

impl KnockoffMatrix {
    /// s_vec mapped to the covariance scale: s_j σ_j².
    pub fn s_covariance_scale(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.s_vec.len(), |j| self.s_vec[j] * self.sigma_hat[[j, j]])
    }
}

/// Draw equicorrelated Gaussian knockoffs for the rows of `x`.
pub fn sample_knockoffs(x: &DataMatrix, seed: u64) -> Result<KnockoffMatrix> {
    let (n, p) = (x.nrows(), x.ncols());
    if p == 0 {
        return Err(Error::invalid("no features to build knockoffs for"));
    }
    if n < p + 1 {
        return Err(Error::SampleTooSmall(format!(
            "knockoffs for {p} features need at least {} rows, got {n}",
            p + 1
        )));
    }
    let xv = x.view();
    let mu = xv.mean_axis(Axis(0)).expect("n > 0");
    let centered = &xv - &mu.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let sd = cov.diag().mapv(f64::sqrt);
    if let Some(j) = (0..p).find(|&j| !(sd[j] > 1e-12 * (1.0 + mu[j].abs()))) {
        return Err(Error::NumericalFailure(format!(
            "column {j} is constant; its covariance is singular"
        )));
    }
    let mut corr = Array2::from_shape_fn((p, p), |(i, j)| cov[[i, j]] / (sd[i] * sd[j]));
    for i in 0..p {
        corr[[i, i]] = 1.0;
    }
    let lmin = min_eigenvalue(&corr);
    let gamma = if lmin >= MIN_EIGENVALUE {
        0.0
    } else {
        (MIN_EIGENVALUE - lmin) / (1.0 - lmin)
    };
    if gamma > 0.0 {
        log::debug!("shrinking feature correlation toward identity by {gamma:.3e}");
        corr.mapv_inplace(|v| (1.0 - gamma) * v);
        for i in 0..p {
            corr[[i, i]] += gamma;
        }
    }
    let chol = to_nalgebra(&corr).cholesky().ok_or_else(|| {
        Error::NumericalFailure("feature correlation is singular after shrinkage".into())
    })?;
    let corr_inv = from_nalgebra(&chol.inverse());
    let s = (2.0 * min_eigenvalue(&corr).max(0.0)).min(1.0);

    // conditional law of the standardized knockoffs given Z:
    // mean Z (I - s C⁻¹), covariance 2sI - s² C⁻¹
    let mut a = corr_inv.mapv(|v| -s * v);
    let mut v = corr_inv.mapv(|v| -s * s * v);
    for i in 0..p {
        a[[i, i]] += 1.0;
        v[[i, i]] += 2.0 * s;
    }
    let v = (&v + &v.t()) * 0.5;
    let (vals, vecs) = symmetric_eigen(&v);
    let root = vals.mapv(|e| e.max(0.0).sqrt());
    let v_half = (&vecs * &root.view().insert_axis(Axis(0))).dot(&vecs.t());

    let z = &centered / &sd.view().insert_axis(Axis(0));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(&mut rng));
    let zk = z.dot(&a) + g.dot(&v_half);
    let xk = &zk * &sd.view().insert_axis(Axis(0)) + mu.view().insert_axis(Axis(0));

    let sigma_hat = Array2::from_shape_fn((p, p), |(i, j)| corr[[i, j]] * sd[i] * sd[j]);
    Ok(KnockoffMatrix {
        xk: DataMatrix::new(xk)?,
        s_vec: Array1::from_elem(p, s),
        mu_hat: mu,
        sigma_hat,
        shrinkage: gamma,
    })
}

/// Ŵ_k = θ_k − θ_{p+k} for a joint fit over (X, X̃).
pub fn importance_scores(theta_joint: &Coefficients) -> Result<Array1<f64>> {
    scores_from_theta(&theta_joint.theta)
}

pub fn scores_from_theta(theta: &Array1<f64>) -> Result<Array1<f64>> {
    let d = theta.len();
    if !d.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "joint coefficient vector has odd length {d}"
        )));
    }
    let p = d / 2;
    Ok(Array1::from_shape_fn(p, |k| theta[k] - theta[p + k]))
}

/// Knockoff+ threshold: the smallest t among the distinct nonzero |w_k| with
/// (1 + #{w_k ≤ −t}) / max(1, #{w_k ≥ t}) ≤ α, or +∞ if none qualifies.
pub fn knockoff_threshold(w: &[f64], alpha: f64) -> f64 {
    let mut pos: Vec<f64> = w.iter().copied().filter(|&v| v > 0.0).collect();
    let mut neg: Vec<f64> = w.iter().filter(|&&v| v < 0.0).map(|v| -v).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut cands: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    for t in cands {
        let n_pos = pos.len() - pos.partition_point(|&v| v < t);
        let n_neg = neg.len() - neg.partition_point(|&v| v < t);
        if (1.0 + n_neg as f64) / (n_pos.max(1) as f64) <= alpha {
            return t;
        }
    }
    f64::INFINITY
}

/// Outcome of the knockoff filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoffReport {
    pub w: Vec<f64>,
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub threshold: f64,
    pub selected: Vec<usize>,
    pub fdp_hat: f64,
    pub alpha_used: f64,
}

impl KnockoffReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("report JSON: {e}")))
    }
}

fn ser_threshold<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*t)
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad threshold '{t}'"))),
    }
}

fn report_at(w: &[f64], alpha: f64) -> KnockoffReport {
    let t = knockoff_threshold(w, alpha);
    let selected: Vec<usize> = (0..w.len()).filter(|&k| w[k] >= t).collect();
    let fdp_hat = if t.is_finite() {
        w.iter().filter(|&&v| v <= -t).count() as f64 / selected.len().max(1) as f64
    } else {
        0.0
    };
    KnockoffReport {
        w: w.to_vec(),
        threshold: t,
        selected,
        fdp_hat,
        alpha_used: alpha,
    }
}

/// Knockoff+ selection at level `alpha`.
///
/// With `escalate`, an empty selection raises α in steps of 0.05 up to 1; if
/// the set is still empty at 1 the single highest-scoring feature (lowest
/// index among ties) is returned with threshold equal to its score.
pub fn select(w: &[f64], alpha: f64, escalate: bool) -> Result<KnockoffReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("importance scores must be finite"));
    }
    let mut report = report_at(w, alpha);
    if !escalate || w.is_empty() {
        return Ok(report);
    }
    let mut step = 0u32;
    while report.selected.is_empty() && report.alpha_used < 1.0 {
        step += 1;
        let mut a = alpha + ALPHA_STEP * step as f64;
        if a > 1.0 - 1e-9 {
            a = 1.0;
        }
        report = report_at(w, a);
    }
    if report.selected.is_empty() {
        let best = (0..w.len())
            .reduce(|b, k| if w[k] > w[b] { k } else { b })
            .expect("non-empty scores");
        let t = w[best];
        report.selected = vec![best];
        report.threshold = t;
        report.fdp_hat = w.iter().filter(|&&v| v <= -t.abs()).count() as f64;
        report.alpha_used = 1.0;
    }
    Ok(report)
}
