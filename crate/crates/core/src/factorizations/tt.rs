//! Tensor-train (TT-matrix) embedding fitted by TT-SVD.
//!
//! The `|V|×d` matrix is zero-padded to `Πvₖ × Πdₖ` rows and viewed as a
//! tensor with modes `nₖ = vₖ·dₖ`, mode index `iₖ·dₖ + jₖ`. Core `k` has shape
//! `(rₖ₋₁, vₖ, dₖ, rₖ)` with boundary ranks 1.

use crate::error::{Error, Result};
use crate::factorizations::CompressedEmbedding;
use crate::linalg::svd;
use crate::matrix::DenseMatrix;

/// Mixed-radix digits of `i`: `i = i₁·v₂·v₃ + i₂·v₃ + i₃` for a 3-factor shape.
pub fn mixed_radix_index(i: usize, shape: &[usize]) -> Result<Vec<usize>> {
    let total: usize = shape.iter().product();
    if shape.is_empty() || i >= total {
        return Err(Error::arg(format!("index {i} out of range for shape {shape:?}")));
    }
    let mut digits = vec![0; shape.len()];
    let mut rest = i;
    for (d, &radix) in digits.iter_mut().zip(shape).rev() {
        *d = rest % radix;
        rest /= radix;
    }
    Ok(digits)
}

/// Inverse of [`mixed_radix_index`].
pub fn mixed_radix_inverse(digits: &[usize], shape: &[usize]) -> Result<usize> {
    if digits.len() != shape.len() || digits.iter().zip(shape).any(|(d, s)| d >= s) {
        return Err(Error::arg(format!("digits {digits:?} invalid for shape {shape:?}")));
    }
    Ok(digits.iter().zip(shape).fold(0, |acc, (d, s)| acc * s + d))
}

/// Bond ranks `[1, r₁, …, r_{N−1}, 1]` produced by TT-SVD:
/// `rₖ = min(ρ, rₖ₋₁·nₖ, Π_{j>k} nⱼ)`.
pub fn tt_ranks(vocab_shape: &[usize], dim_shape: &[usize], tt_rank: usize) -> Vec<usize> {
    let modes: Vec<usize> = vocab_shape.iter().zip(dim_shape).map(|(v, d)| v * d).collect();
    let n = modes.len();
    let mut ranks = vec![1; n + 1];
    for k in 1..n {
        let right: usize = modes[k..].iter().product();
        ranks[k] = tt_rank.min(ranks[k - 1] * modes[k - 1]).min(right);
    }
    ranks
}

/// `Σₖ rₖ₋₁·vₖ·dₖ·rₖ` for the given configuration.
pub fn tt_param_count(vocab_shape: &[usize], dim_shape: &[usize], tt_rank: usize) -> u64 {
    let ranks = tt_ranks(vocab_shape, dim_shape, tt_rank);
    vocab_shape
        .iter()
        .zip(dim_shape)
        .enumerate()
        .map(|(k, (v, d))| (ranks[k] * v * d * ranks[k + 1]) as u64)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtEmbedding {
    vocab: usize,
    vocab_shape: Vec<usize>,
    dim_shape: Vec<usize>,
    ranks: Vec<usize>,
    /// Core `k`, row-major over `(rₖ₋₁, vₖ, dₖ, rₖ)`.
    cores: Vec<Vec<f64>>,
}

impl TtEmbedding {
    pub fn new(
        vocab: usize,
        vocab_shape: Vec<usize>,
        dim_shape: Vec<usize>,
        ranks: Vec<usize>,
        cores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_shapes(vocab, &vocab_shape, &dim_shape)?;
        let n = vocab_shape.len();
        if ranks.len() != n + 1 || ranks[0] != 1 || ranks[n] != 1 || ranks.contains(&0) {
            return Err(Error::arg(format!("invalid TT ranks {ranks:?}")));
        }
        if cores.len() != n {
            return Err(Error::arg(format!("{} cores for {n} factors", cores.len())));
        }
        for k in 0..n {
            let want = ranks[k] * vocab_shape[k] * dim_shape[k] * ranks[k + 1];
            if cores[k].len() != want {
                return Err(Error::arg(format!(
                    "core {k} has {} entries, expected {want}",
                    cores[k].len()
                )));
            }
            if cores[k].iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("core {k} has non-finite entries")));
            }
        }
        Ok(Self {
            vocab,
            vocab_shape,
            dim_shape,
            ranks,
            cores,
        })
    }

    pub fn vocab_shape(&self) -> &[usize] {
        &self.vocab_shape
    }

    pub fn dim_shape(&self) -> &[usize] {
        &self.dim_shape
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn cores(&self) -> &[Vec<f64>] {
        &self.cores
    }

    /// Row `i` of the padded matrix (`i < Πvₖ`).
    fn contract_row(&self, i: usize, out: &mut [f64]) {
        let digits = mixed_radix_index(i, &self.vocab_shape).expect("row index in range");
        // acc: (prefix dim index) × (bond)
        let mut acc = vec![1.0];
        let mut prefix = 1;
        for (k, &ik) in digits.iter().enumerate() {
            let (ra, dk, rb) = (self.ranks[k], self.dim_shape[k], self.ranks[k + 1]);
            let core = &self.cores[k];
            let mut next = vec![0.0; prefix * dk * rb];
            for p in 0..prefix {
                for a in 0..ra {
                    let x = acc[p * ra + a];
                    if x == 0.0 {
                        continue;
                    }
                    let base = ((a * self.vocab_shape[k] + ik) * dk) * rb;
                    for j in 0..dk {
                        let src = &core[base + j * rb..base + (j + 1) * rb];
                        let dst = &mut next[(p * dk + j) * rb..(p * dk + j + 1) * rb];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += x * s;
                        }
                    }
                }
            }
            acc = next;
            prefix *= dk;
        }
        out.copy_from_slice(&acc);
    }
}

fn validate_shapes(vocab: usize, vocab_shape: &[usize], dim_shape: &[usize]) -> Result<()> {
    if vocab_shape.is_empty() || vocab_shape.len() != dim_shape.len() {
        return Err(Error::arg(format!(
            "vocab shape {vocab_shape:?} and dim shape {dim_shape:?} must have equal, non-zero length"
        )));
    }
    if vocab_shape.contains(&0) || dim_shape.contains(&0) {
        return Err(Error::arg("TT shape factors must be positive"));
    }
    let pv: usize = vocab_shape.iter().product();
    if pv < vocab {
        return Err(Error::arg(format!(
            "vocab shape {vocab_shape:?} covers {pv} rows, fewer than |V| = {vocab}"
        )));
    }
    Ok(())
}

impl CompressedEmbedding for TtEmbedding {
    fn vocab(&self) -> usize {
        self.vocab
    }

    fn dim(&self) -> usize {
        self.dim_shape.iter().product()
    }

    fn param_count(&self) -> u64 {
        self.cores.iter().map(|c| c.len() as u64).sum()
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        self.contract_row(i, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtFit {
    pub embedding: TtEmbedding,
    /// Sum of squared singular values discarded over all TT-SVD steps; its
    /// square root bounds the Frobenius reconstruction error.
    pub discarded_sq: f64,
}

impl TtFit {
    pub fn error_bound(&self) -> f64 {
        self.discarded_sq.sqrt()
    }
}

/// TT-SVD with every bond truncated to `min(tt_rank, rows, cols)` of its unfolding.
pub fn tt_fit(e: &DenseMatrix, vocab_shape: &[usize], dim_shape: &[usize], tt_rank: usize) -> Result<TtFit> {
    let (vocab, dim) = e.shape();
    validate_shapes(vocab, vocab_shape, dim_shape)?;
    let pd: usize = dim_shape.iter().product();
    if pd != dim {
        return Err(Error::arg(format!(
            "dim shape {dim_shape:?} multiplies to {pd}, embedding dim is {dim}"
        )));
    }
    if tt_rank == 0 {
        return Err(Error::arg("TT rank must be at least 1"));
    }
    let n = vocab_shape.len();
    let modes: Vec<usize> = vocab_shape.iter().zip(dim_shape).map(|(v, d)| v * d).collect();
    let padded: usize = vocab_shape.iter().product();

    // Full tensor in row-major mode order.
    let total: usize = modes.iter().product();
    let mut tensor = vec![0.0; total];
    for row in 0..vocab {
        let vi = mixed_radix_index(row, vocab_shape)?;
        for col in 0..dim {
            let dj = mixed_radix_index(col, dim_shape)?;
            let flat = vi
                .iter()
                .zip(&dj)
                .zip(dim_shape)
                .zip(&modes)
                .fold(0, |acc, (((i, j), d), m)| acc * m + i * d + j);
            tensor[flat] = e[(row, col)];
        }
    }
    debug_assert!(padded * dim == total);

    let mut ranks = vec![1; n + 1];
    let mut cores = Vec::with_capacity(n);
    let mut discarded_sq = 0.0;
    let mut carry = tensor;
    for k in 0..n - 1 {
        let rows = ranks[k] * modes[k];
        let cols = carry.len() / rows;
        let unfolding = DenseMatrix::new(rows, cols, carry)?;
        let full = svd(&unfolding)?;
        let r = tt_rank.min(rows).min(cols);
        discarded_sq += full.s[r..].iter().map(|s| s * s).sum::<f64>();
        let t = full.truncate(r);
        ranks[k + 1] = r;
        cores.push(t.u.into_vec());
        // diag(S)·Vᵀ becomes the next unfolding (r × cols, row-major).
        let mut next = vec![0.0; r * cols];
        for a in 0..r {
            for c in 0..cols {
                next[a * cols + c] = t.s[a] * t.v[(c, a)];
            }
        }
        carry = next;
    }
    cores.push(carry);

    Ok(TtFit {
        embedding: TtEmbedding::new(vocab, vocab_shape.to_vec(), dim_shape.to_vec(), ranks, cores)?,
        discarded_sq,
    })
}
