//! Predictive models refit on selected features: Lasso with cross-validated
//! λ for regression, ridge-stabilized logistic regression for classification.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::{DataMatrix, Sample};
use crate::dgp::Task;
use crate::error::{Error, Result};
use crate::numeric::spd_solve;
use crate::solver::{signed_coordinate_descent, SolverConfig};

pub const CV_FOLDS: usize = 5;
pub const LAMBDA_PATH_LEN: usize = 20;
/// Smallest λ on the path relative to the largest.
pub const LAMBDA_PATH_RATIO: f64 = 1e-3;
pub const LOGISTIC_RIDGE: f64 = 1e-6;
const LOGISTIC_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub coef: Array1<f64>,
    pub lambda: f64,
}

impl LassoFit {
    pub fn predict(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coef) + self.intercept
    }
}

struct Standardized {
    z: Array2<f64>,
    mean: Array1<f64>,
    sd: Array1<f64>,
}

fn standardize(x: &ArrayView2<f64>) -> Standardized {
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let sd = x.std_axis(Axis(0), 0.0);
    let z = Array2::from_shape_fn(x.dim(), |(i, j)| {
        if sd[j] > 0.0 {
            (x[[i, j]] - mean[j]) / sd[j]
        } else {
            0.0
        }
    });
    Standardized { z, mean, sd }
}

/// Lasso fits along a decreasing λ path, warm-started, on the original scale.
fn lasso_path(x: &ArrayView2<f64>, y: &[f64], lambdas: &[f64]) -> Result<Vec<LassoFit>> {
    let n = x.nrows() as f64;
    let q = x.ncols();
    let st = standardize(x);
    let ybar = y.iter().sum::<f64>() / n;
    let yc = Array1::from_iter(y.iter().map(|v| v - ybar));
    let live: Vec<usize> = (0..q).filter(|&j| st.sd[j] > 0.0).collect();
    let zl = st.z.select(Axis(1), &live);
    let mut k = zl.t().dot(&zl) / n;
    // standardized columns have unit diagonal; guard against rounding
    for j in 0..live.len() {
        k[[j, j]] = k[[j, j]].max(1e-12);
    }
    let j = zl.t().dot(&yc) / n;
    let cfg = SolverConfig::default();
    let mut beta = Array1::zeros(live.len());
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !live.is_empty() {
            beta = signed_coordinate_descent(&k, &j, lambda, &cfg, Some(&beta))?.0;
        }
        let mut coef = Array1::zeros(q);
        for (a, &c) in live.iter().enumerate() {
            coef[c] = beta[a] / st.sd[c];
        }
        let intercept = ybar - coef.dot(&st.mean);
        out.push(LassoFit {
            intercept,
            coef,
            lambda,
        });
    }
    Ok(out)
}

fn lambda_grid(x: &ArrayView2<f64>, y: &[f64]) -> Vec<f64> {
    let n = x.nrows() as f64;
    let st = standardize(x);
    let ybar = y.iter().sum::<f64>() / n;
    let yc = Array1::from_iter(y.iter().map(|v| v - ybar));
    let lmax = st.z.t().dot(&yc).iter().fold(0.0f64, |m, v| m.max(v.abs())) / n;
    let lmax = if lmax > 0.0 { lmax } else { 1.0 };
    (0..LAMBDA_PATH_LEN)
        .map(|i| lmax * LAMBDA_PATH_RATIO.powf(i as f64 / (LAMBDA_PATH_LEN - 1) as f64))
        .collect()
}

/// Lasso with λ picked by K-fold cross-validation over a log-spaced path;
/// CV ties go to the larger λ.
pub fn fit_lasso_cv(x: &ArrayView2<f64>, y: &[f64], seed: u64) -> Result<LassoFit> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid("design and response lengths differ"));
    }
    if n < 2 {
        return Err(Error::SampleTooSmall("Lasso needs at least 2 rows".into()));
    }
    let lambdas = lambda_grid(x, y);
    let folds = CV_FOLDS.min(n);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut cv_err = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let held: Vec<usize> = rows.iter().copied().skip(f).step_by(folds).collect();
        let kept: Vec<usize> = rows.iter().copied().filter(|r| !held.contains(r)).collect();
        if kept.len() < 2 {
            continue;
        }
        let xt = x.select(Axis(0), &kept);
        let yt: Vec<f64> = kept.iter().map(|&r| y[r]).collect();
        let xh = x.select(Axis(0), &held);
        for (e, fit) in cv_err.iter_mut().zip(lasso_path(&xt.view(), &yt, &lambdas)?) {
            let pred = fit.predict(&xh.view());
            *e += held
                .iter()
                .zip(pred.iter())
                .map(|(&r, p)| (y[r] - p).powi(2))
                .sum::<f64>();
        }
    }
    let best = (0..lambdas.len())
        .reduce(|b, i| if cv_err[i] < cv_err[b] { i } else { b })
        .expect("non-empty path");
    let full = lasso_path(x, y, &lambdas[..=best])?;
    Ok(full.into_iter().last().expect("non-empty path"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coef: Array1<f64>,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn predict_proba(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        (x.dot(&self.coef) + self.intercept).mapv(sigmoid)
    }

    pub fn predict(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        self.predict_proba(x).mapv(|p| if p > 0.5 { 1.0 } else { 0.0 })
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression by iteratively reweighted least squares with a
/// LOGISTIC_RIDGE penalty; separable data yields a large but finite fit.
pub fn fit_logistic(x: &ArrayView2<f64>, y: &[f64]) -> Result<LogisticFit> {
    let (n, q) = x.dim();
    if n != y.len() {
        return Err(Error::invalid("design and response lengths differ"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logistic response must be 0/1"));
    }
    let st = standardize(x);
    let mut d = Array2::ones((n, q + 1));
    d.slice_mut(ndarray::s![.., 1..]).assign(&st.z);
    let mut beta = Array1::<f64>::zeros(q + 1);
    let mut iterations = 0;
    for it in 1..=LOGISTIC_MAX_ITERS {
        iterations = it;
        let eta = d.dot(&beta);
        let mu = eta.mapv(sigmoid);
        let w = mu.mapv(|m| (m * (1.0 - m)).max(1e-10));
        let z = Array1::from_shape_fn(n, |i| eta[i] + (y[i] - mu[i]) / w[i]);
        let dw = &d * &w.view().insert_axis(Axis(1));
        let mut a = d.t().dot(&dw);
        for j in 0..=q {
            a[[j, j]] += LOGISTIC_RIDGE * n as f64;
        }
        let b = dw.t().dot(&z);
        let next = spd_solve(&a, &b)
            .ok_or_else(|| Error::NumericalFailure("logistic normal equations are singular".into()))?;
        let change = (&next - &beta).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        beta = next;
        if change < 1e-8 {
            break;
        }
    }
    let mut coef = Array1::zeros(q);
    let mut intercept = beta[0];
    for j in 0..q {
        if st.sd[j] > 0.0 {
            coef[j] = beta[j + 1] / st.sd[j];
            intercept -= coef[j] * st.mean[j];
        }
    }
    Ok(LogisticFit {
        intercept,
        coef,
        iterations,
    })
}

/// Refit on the selected training columns and score on the test set:
/// mean squared error for regression, accuracy for classification. An empty
/// selection predicts the training mean or majority class.
pub fn downstream_fit(
    train_x: &DataMatrix,
    train_y: &Sample,
    test_x: &DataMatrix,
    test_y: &Sample,
    selected: &[usize],
    task: Task,
    seed: u64,
) -> Result<f64> {
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::invalid("train and test designs differ in width"));
    }
    if let Some(&k) = selected.iter().find(|&&k| k >= train_x.ncols()) {
        return Err(Error::invalid(format!("selected index {k} out of range")));
    }
    let ytr = train_y.as_slice();
    let yte = test_y.as_slice();
    let xtr = train_x.view().select(Axis(1), selected);
    let xte = test_x.view().select(Axis(1), selected);
    let nte = yte.len() as f64;
    match task {
        Task::Regression => {
            let pred = if selected.is_empty() {
                let m = ytr.iter().sum::<f64>() / ytr.len() as f64;
                Array1::from_elem(yte.len(), m)
            } else {
                fit_lasso_cv(&xtr.view(), ytr, seed)?.predict(&xte.view())
            };
            Ok(yte.iter().zip(pred.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / nte)
        }
        Task::Classification => {
            let pred = if selected.is_empty() {
                let ones = ytr.iter().filter(|&&v| v == 1.0).count();
                let label = if 2 * ones > ytr.len() { 1.0 } else { 0.0 };
                Array1::from_elem(yte.len(), label)
            } else {
                fit_logistic(&xtr.view(), ytr)?.predict(&xte.view())
            };
            Ok(yte.iter().zip(pred.iter()).filter(|(a, b)| a == b).count() as f64 / nte)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, DgpId, DgpSpec};

    #[test]
    fn oracle_support_reaches_noise_level() {
        let train = generate(&DgpSpec::new(DgpId::L1a, 10_000, 10, 1)).unwrap();
        let test = generate(&DgpSpec::new(DgpId::L1a, 5_000, 10, 2)).unwrap();
        let mse = downstream_fit(&train.x, &train.y, &test.x, &test.y, &[0, 5], Task::Regression, 0)
            .unwrap();
        assert!((mse - 1.0).abs() < 0.1, "mse {mse}");
    }

    #[test]
    fn empty_selection_predicts_mean() {
        let train = generate(&DgpSpec::new(DgpId::L1a, 200, 10, 3)).unwrap();
        let test = generate(&DgpSpec::new(DgpId::L1a, 200, 10, 4)).unwrap();
        let mse = downstream_fit(&train.x, &train.y, &test.x, &test.y, &[], Task::Regression, 0)
            .unwrap();
        let m = train.y.as_slice().iter().sum::<f64>() / 200.0;
        let want = test.y.as_slice().iter().map(|v| (v - m).powi(2)).sum::<f64>() / 200.0;
        assert!((mse - want).abs() < 1e-12);
    }

    #[test]
    fn informative_feature_classifies_well() {
        let make = |seed| {
            let d = generate(&DgpSpec::new(DgpId::C3a, 2000, 6, seed)).unwrap();
            let v = d.x.view();
            let t = Array2::from_shape_fn((2000, 1), |(i, _)| (v[[i, 0]] + v[[i, 5]]).exp());
            (DataMatrix::new(t).unwrap(), d.y)
        };
        let (xtr, ytr) = make(5);
        let (xte, yte) = make(6);
        let acc = downstream_fit(&xtr, &ytr, &xte, &yte, &[0], Task::Classification, 0).unwrap();
        assert!(acc > 0.9, "acc {acc}");
    }

    #[test]
    fn separable_logistic_stays_finite() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&x.view(), &y).unwrap();
        assert!(fit.coef[0].is_finite() && fit.coef[0] > 0.0);
        assert_eq!(fit.predict(&x.view()).to_vec(), y);
    }

    #[test]
    fn lasso_cv_is_seed_deterministic() {
        let d = generate(&DgpSpec::new(DgpId::L1b, 80, 40, 7)).unwrap();
        let a = fit_lasso_cv(&d.x.view(), d.y.as_slice(), 3).unwrap();
        let b = fit_lasso_cv(&d.x.view(), d.y.as_slice(), 3).unwrap();
        assert_eq!(a, b);
        assert!(a.coef[30].abs() > 4.0);
    }
}
