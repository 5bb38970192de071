//! Summation and small dense linear-algebra helpers shared by the estimators,
//! the solver and the knockoff sampler.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (tree) summation. Rounding error grows as O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise-summed inner product of two equal-length slices.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

pub(crate) fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solve `a x = b` for symmetric positive-definite `a`; `None` if the
/// Cholesky factorization fails.
pub(crate) fn spd_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let chol = to_nalgebra(a).cholesky()?;
    let x = chol.solve(&DVector::from_iterator(b.len(), b.iter().copied()));
    Some(Array1::from_iter(x.iter().copied()))
}

/// True when `a - shift * I` admits a Cholesky factorization.
pub(crate) fn is_positive_definite(a: &Array2<f64>, shift: f64) -> bool {
    let mut m = to_nalgebra(a);
    for i in 0..m.nrows() {
        m[(i, i)] -= shift;
    }
    m.cholesky().is_some()
}

/// Eigen-decomposition of a symmetric matrix: (eigenvalues, eigenvectors as columns).
pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = to_nalgebra(a).symmetric_eigen();
    (
        Array1::from_iter(eig.eigenvalues.iter().copied()),
        from_nalgebra(&eig.eigenvectors),
    )
}

pub(crate) fn min_eigenvalue(a: &Array2<f64>) -> f64 {
    symmetric_eigen(a)
        .0
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// SplitMix64 finalizer; used to derive independent child seeds.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
