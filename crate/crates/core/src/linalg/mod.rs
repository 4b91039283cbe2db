//! Dense linear algebra and clustering primitives.

mod kmeans;
mod svd;

pub use kmeans::{kmeans, KMeans, KMeansConfig};
pub use svd::{svd, truncated_svd, Svd, MAX_SWEEPS, ROTATION_TOL};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;

/// `‖A − B‖_F`.
pub fn frobenius_distance(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    Ok(a.sub(b)?.frobenius_norm())
}

/// Seeded i.i.d. `N(0, stddev²)` matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stddev: f64) -> DenseMatrix {
    assert!(stddev > 0.0, "stddev must be positive");
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| stddev * rng.normal())
}

/// Row-weighted rank-`r` approximation minimizing `Σᵢ wᵢ‖aᵢ − uᵢVᵀ‖²`.
///
/// Pure row weights reduce exactly to an SVD of `diag(√w)·A`; the left factor
/// is unscaled afterwards. Returns `(U: m×r, V: n×r)` with orthonormal `V`.
pub fn weighted_low_rank(a: &DenseMatrix, row_weights: &[f64], r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    if row_weights.len() != a.rows() {
        return Err(Error::arg(format!(
            "{} row weights for {} rows",
            row_weights.len(),
            a.rows()
        )));
    }
    if let Some(w) = row_weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::arg(format!("row weights must be positive, got {w}")));
    }
    let sqrt_w: Vec<f64> = row_weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| sqrt_w[i] * a[(i, j)]);
    let t = truncated_svd(&scaled, r)?;
    let u = DenseMatrix::from_fn(a.rows(), r, |i, j| t.u[(i, j)] * t.s[j] / sqrt_w[i]);
    Ok((u, t.v))
}

/// `Σᵢ wᵢ‖aᵢ − (U·Vᵀ)ᵢ‖²`.
pub fn weighted_error(a: &DenseMatrix, weights: &[f64], u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let approx = u.matmul_t(v).expect("conformant factors");
    (0..a.rows())
        .map(|i| {
            let d: f64 = a.row(i).iter().zip(approx.row(i)).map(|(x, y)| (x - y) * (x - y)).sum();
            weights[i] * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_examples() {
        let a = DenseMatrix::from_fn(2, 2, |i, j| (i + j) as f64);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        let b = DenseMatrix::from_fn(2, 2, |i, j| (i + j) as f64 - 1.0);
        assert_eq!(frobenius_distance(&a, &b).unwrap(), 2.0);
        assert!(frobenius_distance(&a, &DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn gaussian_determinism_and_moments() {
        assert_eq!(gaussian_matrix(5, 4, 3, 1.0), gaussian_matrix(5, 4, 3, 1.0));
        assert_ne!(gaussian_matrix(5, 4, 3, 1.0), gaussian_matrix(5, 4, 4, 1.0));
        let g = gaussian_matrix(200, 100, 7, 1.0);
        let n = g.as_slice().len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05);
        assert!((0.95..=1.05).contains(&var.sqrt()), "stddev {}", var.sqrt());
    }

    #[test]
    fn weighted_rejects_nonpositive() {
        let a = gaussian_matrix(3, 2, 1, 1.0);
        assert!(weighted_low_rank(&a, &[1.0, 0.0, 1.0], 1).is_err());
        assert!(weighted_low_rank(&a, &[1.0, -1.0, 1.0], 1).is_err());
        assert!(weighted_low_rank(&a, &[1.0, 1.0], 1).is_err());
    }

    #[test]
    fn weighted_uniform_matches_truncated() {
        let a = gaussian_matrix(10, 6, 2, 1.0);
        let (u, v) = weighted_low_rank(&a, &[3.0; 10], 3).unwrap();
        let t = truncated_svd(&a, 3).unwrap();
        let d = frobenius_distance(&u.matmul_t(&v).unwrap(), &t.reconstruct()).unwrap();
        assert!(d <= 1e-9, "{d}");
    }

    #[test]
    fn weighted_rank_one_exact() {
        let col = gaussian_matrix(5, 1, 4, 1.0);
        let row = gaussian_matrix(1, 3, 5, 1.0);
        let a = col.matmul(&row).unwrap();
        let w = [0.5, 2.0, 7.0, 1.0, 30.0];
        let (u, v) = weighted_low_rank(&a, &w, 1).unwrap();
        assert!(frobenius_distance(&a, &u.matmul_t(&v).unwrap()).unwrap() <= 1e-10);
    }

    #[test]
    fn weighted_beats_unweighted_on_its_objective() {
        let a = gaussian_matrix(6, 4, 6, 1.0);
        let w = [1.0, 1.0, 1.0, 1.0, 100.0, 100.0];
        let (u, v) = weighted_low_rank(&a, &w, 2).unwrap();
        let t = truncated_svd(&a, 2).unwrap();
        let tu = DenseMatrix::from_fn(6, 2, |i, j| t.u[(i, j)] * t.s[j]);
        let weighted = weighted_error(&a, &w, &u, &v);
        let plain = weighted_error(&a, &w, &tu, &t.v);
        assert!(weighted <= plain + 1e-12, "{weighted} > {plain}");
    }
}
