//! Cyclic coordinate descent for weighted-L1 quadratic programs.

use std::borrow::Cow;

use ndarray::{Array1, Array2};

use super::{support_of, AssocSystem, Coefficients, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::numeric::{is_positive_definite, spd_solve};

/// Diagonal shift used when 𝑲 is not safely positive definite.
pub(crate) const RIDGE: f64 = 1e-8;

/// 𝑲 + RIDGE·I when 𝑲 − RIDGE·I has no Cholesky factor, else 𝑲 itself.
pub(crate) fn stabilized(sys: &AssocSystem) -> Cow<'_, AssocSystem> {
    if is_positive_definite(sys.redundancy(), RIDGE) {
        return Cow::Borrowed(sys);
    }
    log::debug!("redundancy matrix is near-singular; adding a {RIDGE:e} ridge");
    let mut s = sys.clone();
    for k in 0..s.dim() {
        s.redundancy[[k, k]] += RIDGE;
    }
    Cow::Owned(s)
}

fn weighted_objective(sys: &AssocSystem, weights: &[f64], theta: &[f64]) -> f64 {
    let pen: f64 = weights.iter().zip(theta).map(|(w, t)| w * t.abs()).sum();
    sys.loss_unchecked(theta) + pen
}

/// Raw coordinate descent on ½θᵀKθ − θᵀJ + Σ w_k|θ_k|.
///
/// With `nonneg` the update is the non-negative soft threshold, otherwise the
/// signed one. `theta` is the warm start and is updated in place. Returns
/// whether the sweep-wise sup-norm change fell below `cfg.cd_tol`, the sweep
/// count, and (if requested) the objective after every sweep.
pub fn coordinate_descent(
    k: &Array2<f64>,
    j: &Array1<f64>,
    weights: &[f64],
    theta: &mut Array1<f64>,
    cfg: &SolverConfig,
    nonneg: bool,
    mut trace: Option<&mut Vec<f64>>,
) -> (bool, usize) {
    let p = j.len();
    let mut g: Array1<f64> = k.dot(&*theta);
    for sweep in 1..=cfg.max_cd_iters {
        let mut max_change: f64 = 0.0;
        for c in 0..p {
            let kcc = k[[c, c]];
            let old = theta[c];
            let r = j[c] - (g[c] - kcc * old);
            let new = if nonneg {
                ((r - weights[c]) / kcc).max(0.0)
            } else {
                r.signum() * (r.abs() - weights[c]).max(0.0) / kcc
            };
            let d = new - old;
            if d != 0.0 {
                theta[c] = new;
                g.scaled_add(d, &k.column(c));
                max_change = max_change.max(d.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            let th = theta.as_slice().expect("contiguous");
            let lin: f64 = th.iter().zip(j).map(|(a, b)| a * b).sum();
            let quad: f64 = th.iter().zip(&g).map(|(a, b)| a * b).sum();
            let pen: f64 = weights.iter().zip(th).map(|(w, t)| w * t.abs()).sum();
            t.push(-lin + 0.5 * quad + pen);
        }
        if max_change < cfg.cd_tol {
            return (true, sweep);
        }
    }
    (false, cfg.max_cd_iters)
}

/// Solve the weighted problem exactly on the current support, dropping
/// coordinates that turn non-positive. Accepted only when the result is
/// feasible, satisfies the KKT conditions off the support, and does not raise
/// the objective.
fn polish(sys: &AssocSystem, weights: &[f64], theta: &Array1<f64>) -> Option<Array1<f64>> {
    let p = sys.dim();
    let mut active = support_of(theta);
    while !active.is_empty() {
        let m = active.len();
        let kss = Array2::from_shape_fn((m, m), |(a, b)| sys.redundancy[[active[a], active[b]]]);
        let rhs: Array1<f64> = active
            .iter()
            .map(|&c| sys.relevance[c] - weights[c])
            .collect();
        let sol = spd_solve(&kss, &rhs)?;
        if sol.iter().all(|&v| v > 0.0) {
            let mut cand = Array1::zeros(p);
            for (a, &c) in active.iter().enumerate() {
                cand[c] = sol[a];
            }
            let g = sys.redundancy.dot(&cand);
            let scale = 1.0 + sys.relevance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let kkt_ok = (0..p)
                .filter(|c| cand[*c] == 0.0)
                .all(|c| sys.relevance[c] - g[c] <= weights[c] + 1e-9 * scale);
            return kkt_ok.then_some(cand);
        }
        active = active
            .iter()
            .zip(sol.iter())
            .filter(|(_, &v)| v > 0.0)
            .map(|(&c, _)| c)
            .collect();
    }
    None
}

/// min_{θ ≥ 0} 𝕃(θ) + Σ w_k θ_k, warm-started at `theta0` (zero if absent).
///
/// The reported objective is the weighted one; callers that need the
/// penalized objective recompute it.
pub fn solve_weighted_l1(
    sys: &AssocSystem,
    weights: &[f64],
    cfg: &SolverConfig,
    theta0: Option<&Array1<f64>>,
) -> Result<Coefficients> {
    let p = sys.dim();
    if weights.len() != p {
        return Err(Error::invalid(format!(
            "{} weights for a {p}-dimensional system",
            weights.len()
        )));
    }
    if let Some(k) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("weight {k} must be finite and >= 0")));
    }
    if let Some(k) = (0..p).find(|&k| !(sys.redundancy[[k, k]] > 0.0)) {
        return Err(Error::invalid(format!(
            "redundancy diagonal must be positive; entry {k} is {}",
            sys.redundancy[[k, k]]
        )));
    }
    let mut theta = match theta0 {
        Some(t) if t.len() == p => t.mapv(|v| v.max(0.0)),
        Some(t) => {
            return Err(Error::invalid(format!(
                "warm start has length {}, system has {p}",
                t.len()
            )))
        }
        None => Array1::zeros(p),
    };
    let mut trace = Vec::new();
    let (converged, _) = coordinate_descent(
        &sys.redundancy,
        &sys.relevance,
        weights,
        &mut theta,
        cfg,
        true,
        cfg.record_trace.then_some(&mut trace),
    );
    for t in trace.iter_mut() {
        *t += sys.constant;
    }
    let mut objective = weighted_objective(sys, weights, theta.as_slice().expect("contiguous"));
    if cfg.polish {
        if let Some(cand) = polish(sys, weights, &theta) {
            let obj = weighted_objective(sys, weights, cand.as_slice().expect("contiguous"));
            if obj <= objective {
                theta = cand;
                objective = obj;
            }
        }
    }
    let status = if converged {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    let mut out = Coefficients::from_theta(theta, objective, status);
    out.sweep_trace = trace;
    Ok(out)
}

/// Signed Lasso min_β ½βᵀKβ − βᵀJ + λ‖β‖₁ by the same coordinate descent.
pub fn signed_coordinate_descent(
    k: &Array2<f64>,
    j: &Array1<f64>,
    lambda: f64,
    cfg: &SolverConfig,
    beta0: Option<&Array1<f64>>,
) -> Result<(Array1<f64>, SolveStatus)> {
    let p = j.len();
    if k.dim() != (p, p) {
        return Err(Error::invalid("Gram matrix and linear term disagree in size"));
    }
    if let Some(c) = (0..p).find(|&c| !(k[[c, c]] > 0.0)) {
        return Err(Error::invalid(format!("Gram diagonal entry {c} is not positive")));
    }
    let mut beta = beta0.cloned().unwrap_or_else(|| Array1::zeros(p));
    let weights = vec![lambda; p];
    let (converged, _) = coordinate_descent(k, j, &weights, &mut beta, cfg, false, None);
    let status = if converged {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    Ok((beta, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn identity_system_soft_thresholds() {
        let sys = AssocSystem::new(array![0.8, 0.05, -0.3, 0.4], Array2::eye(4)).unwrap();
        let c = solve_weighted_l1(&sys, &[0.1; 4], &cfg(), None).unwrap();
        let want = [0.7, 0.0, 0.0, 0.3];
        for k in 0..4 {
            assert!((c.theta[k] - want[k]).abs() < 1e-12);
        }
        assert_eq!(c.support, vec![0, 3]);
        assert_eq!(c.status, SolveStatus::Converged);
    }

    #[test]
    fn two_dimensional_grid_oracle() {
        let sys = AssocSystem::new(array![0.8, 0.6], array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let c = solve_weighted_l1(&sys, &[0.1, 0.1], &cfg(), None).unwrap();
        let f = |a: f64, b: f64| sys.loss_unchecked(&[a, b]) + 0.1 * (a + b);
        let search = |center: (f64, f64), step: f64, half: i32| {
            let (mut best, mut arg) = (f64::INFINITY, center);
            for i in -half..=half {
                for j in -half..=half {
                    let a = (center.0 + i as f64 * step).max(0.0);
                    let b = (center.1 + j as f64 * step).max(0.0);
                    if f(a, b) < best {
                        best = f(a, b);
                        arg = (a, b);
                    }
                }
            }
            arg
        };
        let coarse = search((0.5, 0.5), 2e-3, 250);
        let arg = search(coarse, 2e-5, 100);
        assert!((c.theta[0] - arg.0).abs() < 5e-5 && (c.theta[1] - arg.1).abs() < 5e-5);
        // closed form on the interior: [[1,.5],[.5,1]] θ = (0.7, 0.5)
        assert!((c.theta[0] - 0.6).abs() < 1e-9 && (c.theta[1] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_satisfy_kkt() {
        let k = array![[1.0, 0.3, 0.6], [0.3, 1.0, 0.2], [0.6, 0.2, 1.0]];
        let sys = AssocSystem::new(array![0.5, 0.4, 0.1], k.clone()).unwrap();
        let c = solve_weighted_l1(&sys, &[0.0; 3], &cfg(), None).unwrap();
        let g = k.dot(&c.theta);
        for i in 0..3 {
            if c.theta[i] > 0.0 {
                assert!((sys.relevance()[i] - g[i]).abs() < 1e-6);
            } else {
                assert!(sys.relevance()[i] <= g[i] + 1e-6);
            }
        }
    }

    #[test]
    fn sweep_trace_is_monotone() {
        let k = array![[1.0, 0.9, 0.8], [0.9, 1.0, 0.85], [0.8, 0.85, 1.0]];
        let sys = AssocSystem::new(array![0.9, 0.85, 0.7], k).unwrap();
        let cfg = SolverConfig {
            record_trace: true,
            ..SolverConfig::default()
        };
        let c = solve_weighted_l1(&sys, &[0.01; 3], &cfg, None).unwrap();
        assert!(c.sweep_trace.len() > 2);
        for w in c.sweep_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let k = array![[1.0, 0.99], [0.99, 1.0]];
        let sys = AssocSystem::new(array![1.0, 0.995], k).unwrap();
        let cfg = SolverConfig {
            max_cd_iters: 2,
            polish: false,
            ..SolverConfig::default()
        };
        let c = solve_weighted_l1(&sys, &[0.0; 2], &cfg, None).unwrap();
        assert_eq!(c.status, SolveStatus::NotConverged);
    }

    #[test]
    fn signed_lasso_handles_negative_signal() {
        let (beta, status) =
            signed_coordinate_descent(&Array2::eye(2), &array![-0.5, 0.2], 0.1, &cfg(), None).unwrap();
        assert_eq!(status, SolveStatus::Converged);
        assert!((beta[0] + 0.4).abs() < 1e-12 && (beta[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn near_singular_system_gets_ridge() {
        let k = array![[1.0, 1.0], [1.0, 1.0]];
        let sys = AssocSystem::new(array![0.5, 0.5], k).unwrap();
        let st = stabilized(&sys);
        assert!(st.redundancy()[[0, 0]] > 1.0);
        let c = solve_weighted_l1(&st, &[0.0; 2], &cfg(), None).unwrap();
        assert!((c.theta.sum() - 0.5).abs() < 1e-6);
        let good = AssocSystem::new(array![0.5], array![[1.0]]).unwrap();
        assert!(matches!(stabilized(&good), Cow::Borrowed(_)));
    }
}
