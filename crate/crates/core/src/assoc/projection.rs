//! Squared projection correlation for scalar samples.
//!
//! The centered angle tensor of a scalar sample has a rank-two structure per
//! slice: with s_ir = sign(x_i - x_r) and a_ir = |s_ir|, the raw slice is
//! (π/2)(a aᵀ - s sᵀ), so double centering only needs the centered vectors
//! ã_r and s̃_r. [`AngleFactors`] stores those (O(n²) memory) and evaluates
//! tensor inner products in O(n²). [`AngleTensor`] materializes the full
//! O(n³) tensor from arccos angles and serves as the reference route.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_dot, pairwise_sum};

/// Default cap on n for [`angle_tensor`], which needs n³ doubles.
pub const DEFAULT_MAX_TENSOR_N: usize = 1000;

fn check_min_len(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "projection correlation needs n >= 3, got {n}"
        )));
    }
    Ok(())
}

/// Angle at vertex x_r between x_i and x_l. Zero-length arms give angle 0.
pub(crate) fn raw_angle(v: &[f64], i: usize, l: usize, r: usize) -> f64 {
    if i == r || l == r {
        return 0.0;
    }
    let u = v[i] - v[r];
    let w = v[l] - v[r];
    let denom = u.abs() * w.abs();
    if denom == 0.0 {
        return 0.0;
    }
    (u * w / denom).clamp(-1.0, 1.0).acos()
}

/// Full n×n×n tensor of per-slice double-centered angles.
#[derive(Debug, Clone)]
pub struct AngleTensor {
    sample: Vec<f64>,
    // slice-major: index (r * n + i) * n + l
    entries: Vec<f64>,
    sqnorm: f64,
}

impl AngleTensor {
    pub fn n(&self) -> usize {
        self.sample.len()
    }

    /// Centered entry [𝒦]_{ilr}.
    pub fn get(&self, i: usize, l: usize, r: usize) -> f64 {
        let n = self.n();
        self.entries[(r * n + i) * n + l]
    }

    /// Raw (uncentered) angle K_{ilr} in [0, π].
    pub fn raw(&self, i: usize, l: usize, r: usize) -> f64 {
        raw_angle(&self.sample, i, l, r)
    }

    pub fn sqnorm(&self) -> f64 {
        self.sqnorm
    }

    /// (1/n³) Σ [𝒦]_{ilr} [𝓛]_{ilr}.
    pub fn pcov(&self, other: &AngleTensor) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::invalid("angle tensors differ in size"));
        }
        let n = self.n() as f64;
        Ok(pairwise_dot(&self.entries, &other.entries) / (n * n * n))
    }
}

pub fn angle_tensor(x: &Sample) -> Result<AngleTensor> {
    angle_tensor_with_limit(x, DEFAULT_MAX_TENSOR_N)
}

pub fn angle_tensor_with_limit(x: &Sample, max_n: usize) -> Result<AngleTensor> {
    let v = x.as_slice().to_vec();
    let n = v.len();
    check_min_len(n)?;
    if n > max_n {
        return Err(Error::ResourceLimit(format!(
            "angle tensor for n = {n} needs {} doubles; limit is n <= {max_n}",
            n.pow(3)
        )));
    }
    let mut entries = vec![0.0; n * n * n];
    let inv_n = 1.0 / n as f64;
    let mut slice = vec![0.0; n * n];
    for r in 0..n {
        for i in 0..n {
            for l in 0..n {
                slice[i * n + l] = raw_angle(&v, i, l, r);
            }
        }
        let row_means: Vec<f64> = (0..n)
            .map(|i| pairwise_sum(&slice[i * n..(i + 1) * n]) * inv_n)
            .collect();
        let col_means: Vec<f64> = (0..n)
            .map(|l| (0..n).map(|i| slice[i * n + l]).sum::<f64>() * inv_n)
            .collect();
        let grand = pairwise_sum(&row_means) * inv_n;
        let out = &mut entries[r * n * n..(r + 1) * n * n];
        for i in 0..n {
            for l in 0..n {
                out[i * n + l] = slice[i * n + l] - row_means[i] - col_means[l] + grand;
            }
        }
    }
    let sqnorm = pairwise_dot(&entries, &entries);
    Ok(AngleTensor {
        sample: v,
        entries,
        sqnorm,
    })
}

/// Per-slice centered sign vectors of a scalar sample; a compact stand-in
/// for the centered angle tensor.
#[derive(Debug, Clone)]
pub struct AngleFactors {
    n: usize,
    // row r holds the centered |sign| vector ã_r
    abs_signs: Array2<f64>,
    // row r holds the centered sign vector s̃_r
    signs: Array2<f64>,
    sqnorm: f64,
}

impl AngleFactors {
    pub fn new(x: &Sample) -> Result<Self> {
        let v = x.as_slice();
        let n = v.len();
        check_min_len(n)?;
        let mut abs_signs = Array2::zeros((n, n));
        let mut signs = Array2::zeros((n, n));
        for r in 0..n {
            let mut s_row = vec![0.0; n];
            for i in 0..n {
                let d = v[i] - v[r];
                s_row[i] = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
            let a_row: Vec<f64> = s_row.iter().map(|s: &f64| s.abs()).collect();
            let s_mean = pairwise_sum(&s_row) / n as f64;
            let a_mean = pairwise_sum(&a_row) / n as f64;
            for i in 0..n {
                signs[[r, i]] = s_row[i] - s_mean;
                abs_signs[[r, i]] = a_row[i] - a_mean;
            }
        }
        let mut f = AngleFactors {
            n,
            abs_signs,
            signs,
            sqnorm: 0.0,
        };
        f.sqnorm = f.inner_unchecked(&f);
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Σ_{ilr} [𝒦]_{ilr}², identical to [`AngleTensor::sqnorm`].
    pub fn sqnorm(&self) -> f64 {
        self.sqnorm
    }

    pub(crate) fn is_degenerate(&self) -> bool {
        !(self.sqnorm > 1e-12)
    }

    /// Σ_{ilr} [𝒦]_{ilr} [𝓛]_{ilr} without forming either tensor.
    pub fn inner(&self, other: &AngleFactors) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::invalid("angle factors differ in size"));
        }
        Ok(self.inner_unchecked(other))
    }

    fn inner_unchecked(&self, other: &AngleFactors) -> f64 {
        let per_slice: Vec<f64> = (0..self.n)
            .map(|r| {
                let a = self.abs_signs.row(r);
                let s = self.signs.row(r);
                let b = other.abs_signs.row(r);
                let t = other.signs.row(r);
                let (a, s, b, t) = (
                    a.as_slice().unwrap(),
                    s.as_slice().unwrap(),
                    b.as_slice().unwrap(),
                    t.as_slice().unwrap(),
                );
                let ab = pairwise_dot(a, b);
                let at = pairwise_dot(a, t);
                let sb = pairwise_dot(s, b);
                let st = pairwise_dot(s, t);
                ab * ab - at * at - sb * sb + st * st
            })
            .collect();
        0.25 * PI * PI * pairwise_sum(&per_slice)
    }
}

/// Squared projection covariance V-statistic (1/n³) Σ [𝒦_X]_{ilr} [𝓛_Y]_{ilr}.
pub fn pcov_v(x: &Sample, y: &Sample) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("samples differ in length"));
    }
    let fx = AngleFactors::new(x)?;
    let fy = AngleFactors::new(y)?;
    let n = x.len() as f64;
    Ok(fx.inner(&fy)? / (n * n * n))
}

/// Squared projection correlation: Pcov² normalized by the geometric mean of
/// the self terms.
pub fn pc_squared_v(x: &Sample, y: &Sample) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("samples differ in length"));
    }
    let fx = AngleFactors::new(x)?;
    let fy = AngleFactors::new(y)?;
    if fx.is_degenerate() {
        return Err(Error::degenerate(None, "zero projection self-covariance"));
    }
    if fy.is_degenerate() {
        return Err(Error::degenerate(None, "zero projection self-covariance of the second sample"));
    }
    Ok(fx.inner(&fy)? / (fx.sqnorm() * fy.sqnorm()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_sample(n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sample::from_vec((0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn scalar_angles_are_zero_or_pi() {
        let t = angle_tensor(&random_sample(7, 1)).unwrap();
        for r in 0..7 {
            for i in 0..7 {
                for l in 0..7 {
                    let a = t.raw(i, l, r);
                    assert!(a == 0.0 || a == PI, "angle {a}");
                    if i == r || l == r {
                        assert_eq!(a, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn three_point_hand_computation() {
        let t = angle_tensor(&Sample::from_vec(vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        // vertex x_3 = 2, arms (0-2) and (1-2) point the same way
        assert_eq!(t.raw(0, 1, 2), 0.0);
        // vertex x_2 = 1, arms (0-1) and (2-1) point opposite ways
        assert_eq!(t.raw(0, 2, 1), PI);
    }

    #[test]
    fn centered_tensor_is_symmetric_within_slices() {
        let t = angle_tensor(&random_sample(6, 2)).unwrap();
        for r in 0..6 {
            for i in 0..6 {
                for l in 0..6 {
                    assert!((t.get(i, l, r) - t.get(l, i, r)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn coincident_points_get_zero_angle() {
        let x = Sample::from_vec(vec![1.0, 1.0, 3.0, -2.0]).unwrap();
        let t = angle_tensor(&x).unwrap();
        assert_eq!(t.raw(0, 2, 1), 0.0);
        assert!(t.sqnorm().is_finite());
    }

    #[test]
    fn factors_match_explicit_tensor() {
        for seed in 0..5 {
            let x = random_sample(9, seed);
            let y = random_sample(9, seed + 100);
            let (tx, ty) = (angle_tensor(&x).unwrap(), angle_tensor(&y).unwrap());
            let (fx, fy) = (AngleFactors::new(&x).unwrap(), AngleFactors::new(&y).unwrap());
            assert!((tx.sqnorm() - fx.sqnorm()).abs() < 1e-9 * tx.sqnorm());
            let explicit = tx.pcov(&ty).unwrap();
            let factored = pcov_v(&x, &y).unwrap();
            assert!((explicit - factored).abs() < 1e-12, "{explicit} vs {factored}");
            let _ = fy;
        }
    }

    #[test]
    fn tensor_size_limit_is_enforced() {
        let err = angle_tensor_with_limit(&random_sample(12, 0), 10).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
        assert!(angle_tensor(&Sample::from_vec(vec![0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn self_correlation_is_one_and_constant_is_degenerate() {
        let x = random_sample(30, 4);
        assert!((pc_squared_v(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let c = Sample::from_vec(vec![2.0; 30]).unwrap();
        assert!(matches!(
            pc_squared_v(&x, &c),
            Err(Error::DegenerateFeature { .. })
        ));
    }
}
