//! Gaussian Gram matrices and the HSIC family of estimators.

use ndarray::Array2;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_dot, pairwise_sum};

/// K_ij = exp(-(x_i - x_j)² / (2 h²)).
pub fn gaussian_kernel_matrix(x: &Sample, bandwidth: f64) -> Result<Array2<f64>> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    let v = x.as_slice();
    let n = v.len();
    let scale = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut k = Array2::<f64>::ones((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = v[i] - v[j];
            let e = (-d * d * scale).exp();
            k[[i, j]] = e;
            k[[j, i]] = e;
        }
    }
    Ok(k)
}

/// Median of the n(n-1)/2 pairwise absolute differences.
///
/// Zero distances (ties) take part in the median. When ties push the median
/// to zero while some distance is positive, the smallest positive distance is
/// returned instead so the bandwidth stays usable.
pub fn median_heuristic_bandwidth(x: &Sample) -> Result<f64> {
    let v = x.as_slice();
    let n = v.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push((v[i] - v[j]).abs());
        }
    }
    let m = dists.len();
    let (_, &mut upper, _) = dists.select_nth_unstable_by(m / 2, f64::total_cmp);
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = dists[..m / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        return Ok(median);
    }
    dists
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .reduce(f64::min)
        .ok_or_else(|| Error::degenerate(None, "all values identical; median heuristic undefined"))
}

/// A doubly centered Gram matrix H K H together with its Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGram {
    entries: Array2<f64>,
    frob: f64,
}

impl CenteredGram {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn frob(&self) -> f64 {
        self.frob
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.entries.as_slice().expect("standard layout")
    }

    /// Below this norm the centered Gram carries no signal.
    pub(crate) fn is_degenerate(&self) -> bool {
        !(self.frob > 1e-12 * self.n() as f64)
    }
}

/// H K H via K_ij - mean_i(K_·j) - mean_j(K_i·) + mean(K), without forming H.
pub fn center_gram(k: &Array2<f64>) -> CenteredGram {
    let n = k.nrows();
    assert_eq!(n, k.ncols(), "Gram matrix must be square");
    let inv_n = 1.0 / n as f64;
    let row_means: Vec<f64> = k
        .rows()
        .into_iter()
        .map(|r| pairwise_sum(&r.to_vec()) * inv_n)
        .collect();
    let col_means: Vec<f64> = k
        .columns()
        .into_iter()
        .map(|c| pairwise_sum(&c.to_vec()) * inv_n)
        .collect();
    let grand = pairwise_sum(&row_means) * inv_n;
    let entries = Array2::from_shape_fn((n, n), |(i, j)| {
        k[[i, j]] - col_means[j] - row_means[i] + grand
    });
    let frob = pairwise_dot(
        entries.as_slice().expect("standard layout"),
        entries.as_slice().expect("standard layout"),
    )
    .sqrt();
    CenteredGram { entries, frob }
}

/// V-statistic HSIC: (1/n²) Σ_ij [HKH]_ij [HLH]_ij = (1/n²) tr(K H L H).
pub fn hsic_v(kc: &CenteredGram, lc: &CenteredGram) -> Result<f64> {
    if kc.n() != lc.n() {
        return Err(Error::invalid(format!(
            "Gram dimensions differ: {} vs {}",
            kc.n(),
            lc.n()
        )));
    }
    let n = kc.n() as f64;
    Ok(pairwise_dot(kc.as_slice(), lc.as_slice()) / (n * n))
}

/// Unbiased HSIC from raw Gram matrices, as the three-term U-statistic over
/// index tuples drawn without replacement.
///
/// Each tuple sum is reduced to O(n²) work by inclusion-exclusion on the
/// zero-diagonal matrices; no symmetry of the inputs is assumed.
pub fn hsic_u(k: &Array2<f64>, l: &Array2<f64>) -> Result<f64> {
    let n = k.nrows();
    if k.ncols() != n || l.dim() != (n, n) {
        return Err(Error::invalid("hsic_u needs two square matrices of equal size"));
    }
    if n < 4 {
        return Err(Error::invalid(format!(
            "hsic_u needs n >= 4 for the 4-tuple term, got {n}"
        )));
    }
    let zero_diag = |m: &Array2<f64>| {
        let mut out = m.clone();
        out.diag_mut().fill(0.0);
        out
    };
    let kt = zero_diag(k);
    let lt = zero_diag(l);
    let row_sums = |m: &Array2<f64>| -> Vec<f64> {
        m.rows().into_iter().map(|r| pairwise_sum(&r.to_vec())).collect()
    };
    let col_sums = |m: &Array2<f64>| -> Vec<f64> {
        m.columns().into_iter().map(|c| pairwise_sum(&c.to_vec())).collect()
    };
    let (k_row, k_col) = (row_sums(&kt), col_sums(&kt));
    let (l_row, l_col) = (row_sums(&lt), col_sums(&lt));
    let k_total = pairwise_sum(&k_row);
    let l_total = pairwise_sum(&l_row);

    let kt_s = kt.as_slice().expect("standard layout");
    // Σ_{i≠j} K_ij L_ij and Σ_{i≠j} K_ij L_ji
    let same = pairwise_dot(kt_s, lt.as_slice().expect("standard layout"));
    let lt_t = lt.t().as_standard_layout().to_owned();
    let swapped = pairwise_dot(kt_s, lt_t.as_slice().expect("standard layout"));

    // (i,j,m) distinct: Σ K_ij L_im
    let triple = pairwise_dot(&k_row, &l_row) - same;
    // (i,j,m,l) distinct: Σ K_ij L_ml. The four ways the pair (m,l) can touch
    // (i,j) are subtracted; double coincidences were removed twice.
    let overlap = pairwise_dot(&k_row, &l_row)
        + pairwise_dot(&k_col, &l_row)
        + pairwise_dot(&k_row, &l_col)
        + pairwise_dot(&k_col, &l_col)
        - same
        - swapped;
    let quad = k_total * l_total - overlap;

    let nf = n as f64;
    let p2 = nf * (nf - 1.0);
    let p3 = p2 * (nf - 2.0);
    let p4 = p3 * (nf - 3.0);
    Ok(same / p2 + quad / p4 - 2.0 * triple / p3)
}

pub(crate) fn centered_gaussian_gram(x: &Sample, bandwidth: Option<f64>) -> Result<CenteredGram> {
    let h = match bandwidth {
        Some(h) => h,
        None => median_heuristic_bandwidth(x)?,
    };
    let kc = center_gram(&gaussian_kernel_matrix(x, h)?);
    if kc.is_degenerate() {
        return Err(Error::degenerate(None, "zero self-dependence (HSIC(X,X) = 0)"));
    }
    Ok(kc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(v: &[f64]) -> Sample {
        Sample::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn kernel_of_constant_sample_is_all_ones() {
        let k = gaussian_kernel_matrix(&sample(&[0.0, 0.0, 0.0]), 0.7).unwrap();
        assert!(k.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn kernel_two_points_unit_bandwidth() {
        let k = gaussian_kernel_matrix(&sample(&[0.0, 1.0]), 1.0).unwrap();
        assert!((k[[0, 1]] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k[[0, 1]] - 0.60653).abs() < 1e-5);
        assert_eq!(k[[0, 0]], 1.0);
    }

    #[test]
    fn kernel_with_median_bandwidth_on_three_points() {
        let x = sample(&[0.0, 1.0, 2.0]);
        let h = median_heuristic_bandwidth(&x).unwrap();
        assert_eq!(h, 1.0);
        let k = gaussian_kernel_matrix(&x, h).unwrap();
        assert!((k[[0, 2]] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_bad_bandwidth() {
        assert!(gaussian_kernel_matrix(&sample(&[0.0, 1.0]), 0.0).is_err());
        assert!(gaussian_kernel_matrix(&sample(&[0.0, 1.0]), f64::NAN).is_err());
    }

    #[test]
    fn median_heuristic_examples() {
        assert_eq!(median_heuristic_bandwidth(&sample(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(median_heuristic_bandwidth(&sample(&[0.0, 1.0, 2.0])).unwrap(), 1.0);
        let err = median_heuristic_bandwidth(&sample(&[3.0, 3.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateFeature { .. }));
    }

    #[test]
    fn median_heuristic_falls_back_to_smallest_positive_distance() {
        // six zero distances and four of 0.5: the median is 0
        let h = median_heuristic_bandwidth(&sample(&[0.0, 0.0, 0.0, 0.0, 0.5])).unwrap();
        assert_eq!(h, 0.5);
    }

    #[test]
    fn centering_examples() {
        let c = center_gram(&Array2::ones((4, 4)));
        assert!(c.entries().iter().all(|&v| v == 0.0));
        assert_eq!(c.frob(), 0.0);

        let c = center_gram(&array![[1.0, 0.0], [0.0, 1.0]]);
        let expected = array![[0.5, -0.5], [-0.5, 0.5]];
        for (a, b) in c.entries().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((c.frob() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centered_rows_and_columns_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Sample::from_vec((0..300).map(|_| rng.random::<f64>() * 5.0).collect()).unwrap();
        let kc = center_gram(&gaussian_kernel_matrix(&x, 0.8).unwrap());
        for r in kc.entries().rows() {
            assert!(r.sum().abs() < 1e-10);
        }
        for c in kc.entries().columns() {
            assert!(c.sum().abs() < 1e-10);
        }
        let e = kc.entries();
        for i in 0..e.nrows() {
            for j in 0..i {
                assert!((e[[i, j]] - e[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hsic_of_constant_response_is_zero() {
        let x = sample(&[0.1, 0.5, -1.0, 2.0]);
        let kc = center_gram(&gaussian_kernel_matrix(&x, 1.0).unwrap());
        let lc = center_gram(&gaussian_kernel_matrix(&sample(&[1.0; 4]), 1.0).unwrap());
        assert_eq!(hsic_v(&kc, &lc).unwrap(), 0.0);
        let self_term = hsic_v(&kc, &kc).unwrap();
        assert!((self_term - kc.frob().powi(2) / 16.0).abs() < 1e-15);
        assert!(self_term > 0.0);
    }

    #[test]
    fn hsic_v_rejects_size_mismatch() {
        let a = center_gram(&Array2::eye(3));
        let b = center_gram(&Array2::eye(4));
        assert!(hsic_v(&a, &b).is_err());
    }

    #[test]
    fn hsic_u_needs_four_points() {
        let k = Array2::<f64>::eye(3);
        assert!(matches!(hsic_u(&k, &k), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn degenerate_gram_is_reported() {
        let err = centered_gaussian_gram(&sample(&[2.0, 2.0, 2.0]), Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateFeature { .. }));
    }
}
