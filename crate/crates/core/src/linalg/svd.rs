//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Tall inputs are first reduced with a Householder QR so the rotations run
//! on the small `n×n` triangular factor.

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Maximum number of Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;
/// A column pair is considered orthogonal when `|wₚ·w_q| ≤ TOL·‖wₚ‖‖w_q‖`.
pub const ROTATION_TOL: f64 = 1e-12;

/// Thin SVD `A = U·diag(S)·Vᵀ` with `k` retained triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// `m×k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-negative, non-increasing.
    pub s: Vec<f64>,
    /// `n×k`, orthonormal columns.
    pub v: DenseMatrix,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.rank();
        let us = DenseMatrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul_t(&self.v).expect("svd factors are conformant")
    }

    /// Keep the leading `r` triplets.
    pub fn truncate(&self, r: usize) -> Svd {
        Svd {
            u: self.u.column_block(0, r),
            s: self.s[..r].to_vec(),
            v: self.v.column_block(0, r),
        }
    }
}

/// Full thin SVD with `k = min(rows, cols)`.
///
/// The output is canonical: in every column of `V` the entry of largest
/// magnitude (lowest index on ties) is non-negative, with the matching
/// column of `U` flipped alongside. Equal inputs give bit-equal outputs.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("cannot decompose a {m}x{n} matrix")));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut out = if m >= n {
        svd_tall(a)?
    } else {
        let t = svd_tall(&a.transpose())?;
        Svd { u: t.v, s: t.s, v: t.u }
    };
    apply_sign_convention(&mut out);
    Ok(out)
}

/// Leading `r` singular triplets.
pub fn truncated_svd(a: &DenseMatrix, r: usize) -> Result<Svd> {
    let k = a.rows().min(a.cols());
    if r == 0 || r > k {
        return Err(Error::arg(format!(
            "rank {r} outside 1..={k} for a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    Ok(svd(a)?.truncate(r))
}

/// Columns of a matrix stored contiguously (column-major working copy).
struct Columns {
    len: usize,
    data: Vec<f64>,
}

impl Columns {
    fn from_matrix(a: &DenseMatrix) -> Self {
        let (m, n) = a.shape();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for (j, &x) in a.row(i).iter().enumerate() {
                data[j * m + i] = x;
            }
        }
        Self { len: m, data }
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            data[j * n + j] = 1.0;
        }
        Self { len: n, data }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.len..(j + 1) * self.len]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.len..(j + 1) * self.len]
    }

    /// Mutable views of columns `p < q`.
    fn pair_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let (lo, hi) = self.data.split_at_mut(q * self.len);
        (&mut lo[p * self.len..(p + 1) * self.len], &mut hi[..self.len])
    }

    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        let (wp, wq) = self.pair_mut(p, q);
        for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
            let (a, b) = (*x, *y);
            *x = c * a - s * b;
            *y = s * a + c * b;
        }
    }
}

fn svd_tall(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    if m == n {
        let (w, v) = jacobi(Columns::from_matrix(a), n)?;
        return Ok(finish(w, v, n));
    }
    let (q, r) = householder_qr(a);
    let (w, v) = jacobi(Columns::from_matrix(&r), n)?;
    let small = finish(w, v, n);
    Ok(Svd {
        u: q.matmul(&small.u)?,
        s: small.s,
        v: small.v,
    })
}

/// Rotate column pairs of `w` until all are mutually orthogonal.
/// Returns the rotated columns and the accumulated right rotation.
fn jacobi(mut w: Columns, n: usize) -> Result<(Columns, Columns)> {
    let mut v = Columns::identity(n);
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                w.rotate(p, q, c, s);
                v.rotate(p, q, c, s);
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::NoConvergence {
        what: "one-sided Jacobi SVD",
        iterations: MAX_SWEEPS,
    })
}

/// Turn orthogonal columns into sorted singular triplets with an orthonormal `U`.
fn finish(w: Columns, v: Columns, n: usize) -> Svd {
    let m = w.len;
    let sigma: Vec<f64> = (0..n).map(|j| dot(w.col(j), w.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in original column order.
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &j in &order {
        let candidate: Vec<f64> = if sigma[j] > 0.0 {
            w.col(j).iter().map(|x| x / sigma[j]).collect()
        } else {
            vec![0.0; m]
        };
        let u = orthonormalize(candidate, &u_cols).unwrap_or_else(|| complete_basis(&u_cols, m));
        u_cols.push(u);
    }

    let u = DenseMatrix::from_fn(m, n, |i, k| u_cols[k][i]);
    let vm = DenseMatrix::from_fn(v.len, n, |i, k| v.col(order[k])[i]);
    Svd {
        u,
        s: order.iter().map(|&j| sigma[j]).collect(),
        v: vm,
    }
}

/// Two passes of Gram-Schmidt against `basis`; `None` if the vector collapses.
fn orthonormalize(mut x: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let before = dot(&x, &x).sqrt();
    if before == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(&x, b);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
        }
    }
    let after = dot(&x, &x).sqrt();
    if after <= 1e-8 * before {
        return None;
    }
    x.iter_mut().for_each(|xi| *xi /= after);
    Some(x)
}

fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    (0..m)
        .find_map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            orthonormalize(e, basis).filter(|u| basis.iter().all(|b| dot(u, b).abs() < 1e-12))
        })
        .expect("basis of size < m can always be extended")
}

/// Householder QR of a tall `m×n` matrix: returns thin `Q` (`m×n`) and `R` (`n×n`).
fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    let mut cols = Columns::from_matrix(a);
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &cols.col(k)[k..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        v.iter_mut().for_each(|vi| *vi /= vnorm);
        for j in k..n {
            let col = &mut cols.col_mut(j)[k..];
            let c = 2.0 * dot(&v, col);
            col.iter_mut().zip(&v).for_each(|(ci, vi)| *ci -= c * vi);
        }
        reflectors.push(v);
    }
    let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { cols.col(j)[i] } else { 0.0 });

    // Q = H₀ H₁ … H_{n-1} applied to the first n columns of the identity.
    let mut q = Columns {
        len: m,
        data: vec![0.0; m * n],
    };
    for j in 0..n {
        q.col_mut(j)[j] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let col = &mut q.col_mut(j)[k..];
            let c = 2.0 * dot(v, col);
            if c != 0.0 {
                col.iter_mut().zip(v).for_each(|(ci, vi)| *ci -= c * vi);
            }
        }
    }
    let q = DenseMatrix::from_fn(m, n, |i, j| q.col(j)[i]);
    (q, r)
}

fn apply_sign_convention(svd: &mut Svd) {
    let k = svd.rank();
    for j in 0..k {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..svd.v.rows() {
            let a = svd.v[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if svd.v[(best, j)] < 0.0 {
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn orthonormality_error(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
    }

    fn rel_residual(a: &DenseMatrix, s: &Svd) -> f64 {
        a.sub(&s.reconstruct()).unwrap().frobenius_norm() / a.frobenius_norm().max(1.0)
    }

    #[test]
    fn identity() {
        let s = svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(s.s, vec![1.0, 1.0, 1.0]);
        let uvt = s.u.matmul_t(&s.v).unwrap();
        assert!(uvt.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn diagonal() {
        let s = svd(&DenseMatrix::from_diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(s.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn shapes_and_orthonormality() {
        for (m, n, seed) in [(8, 5, 1), (5, 8, 2), (40, 12, 3), (7, 7, 4), (1, 6, 5), (6, 1, 6)] {
            let a = gaussian_matrix(m, n, seed, 1.0);
            let s = svd(&a).unwrap();
            let k = m.min(n);
            assert_eq!(s.u.shape(), (m, k));
            assert_eq!(s.v.shape(), (n, k));
            assert!(orthonormality_error(&s.u) <= 1e-9);
            assert!(orthonormality_error(&s.v) <= 1e-9);
            assert!(rel_residual(&a, &s) <= 1e-10);
            assert!(s.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_keeps_orthonormal_u() {
        // rank 2 inside a 6x4 matrix
        let l = gaussian_matrix(6, 2, 8, 1.0);
        let r = gaussian_matrix(2, 4, 9, 1.0);
        let a = l.matmul(&r).unwrap();
        let s = svd(&a).unwrap();
        assert!(s.s[2] < 1e-12 && s.s[3] < 1e-12);
        assert!(orthonormality_error(&s.u) <= 1e-9);
        assert!(rel_residual(&a, &s) <= 1e-10);

        let z = svd(&DenseMatrix::zeros(4, 3)).unwrap();
        assert_eq!(z.s, vec![0.0; 3]);
        assert!(orthonormality_error(&z.u) <= 1e-12);
    }

    #[test]
    fn sign_convention() {
        let a = gaussian_matrix(9, 4, 10, 1.0);
        let s = svd(&a).unwrap();
        for j in 0..4 {
            let col = s.v.column(j);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] >= 0.0);
        }
        let mut neg = a.clone();
        neg.scale(-1.0);
        let sn = svd(&neg).unwrap();
        // Flipping A flips U only.
        assert_eq!(s.v, sn.v);
    }

    #[test]
    fn truncated_rank_range() {
        let a = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        assert!(truncated_svd(&a, 0).is_err());
        assert!(truncated_svd(&a, 4).is_err());
        let t = truncated_svd(&a, 2).unwrap();
        assert_eq!(t.s, vec![3.0, 2.0]);
        let err = a.sub(&t.reconstruct()).unwrap().frobenius_norm();
        assert!((err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::InvalidInput(_))));
    }
}
