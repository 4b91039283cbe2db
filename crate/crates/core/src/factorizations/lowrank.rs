use crate::error::{Error, Result};
use crate::factorizations::{check_hidden, Activation, CompressedEmbedding};
use crate::linalg::truncated_svd;
use crate::matrix::{axpy, DenseMatrix};

/// `Ẽ = f(U)·Vᵀ` with `U: |V|×r`, `V: d×r`.
///
/// With `Activation::Identity` this is plain truncated SVD; with
/// `Activation::Relu` it is the funneling decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankEmbedding {
    u: DenseMatrix,
    v: DenseMatrix,
    activation: Activation,
}

impl LowRankEmbedding {
    pub fn new(u: DenseMatrix, v: DenseMatrix, activation: Activation) -> Result<Self> {
        let r = u.cols();
        if v.cols() != r {
            return Err(Error::arg(format!("U has rank {r} but V has {} columns", v.cols())));
        }
        if r == 0 || r > v.rows() {
            return Err(Error::arg(format!(
                "rank {r} must be in 1..={} (embedding dim)",
                v.rows()
            )));
        }
        if u.rows() == 0 {
            return Err(Error::arg("empty vocabulary"));
        }
        Ok(Self { u, v, activation })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub(crate) fn factors_mut(&mut self) -> (&mut DenseMatrix, &mut DenseMatrix) {
        (&mut self.u, &mut self.v)
    }

    pub fn into_factors(self) -> (DenseMatrix, DenseMatrix, Activation) {
        (self.u, self.v, self.activation)
    }

    /// `f(U)`
    pub fn activated_u(&self) -> DenseMatrix {
        let act = self.activation;
        DenseMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| act.apply(self.u[(i, j)]))
    }
}

/// Truncated-SVD initialization: `U = U_r·diag(S_r)`, `V = V_r`.
pub fn init_from_svd(e: &DenseMatrix, r: usize, activation: Activation) -> Result<LowRankEmbedding> {
    let t = truncated_svd(e, r)?;
    let u = DenseMatrix::from_fn(e.rows(), r, |i, j| t.u[(i, j)] * t.s[j]);
    LowRankEmbedding::new(u, t.v, activation)
}

impl CompressedEmbedding for LowRankEmbedding {
    fn vocab(&self) -> usize {
        self.u.rows()
    }

    fn dim(&self) -> usize {
        self.v.rows()
    }

    fn param_count(&self) -> u64 {
        (self.rank() * (self.vocab() + self.dim())) as u64
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        let act = self.activation;
        let ui = self.u.row(i);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.v.row(k).iter().zip(ui).map(|(vk, uk)| act.apply(*uk) * vk).sum();
        }
    }

    /// `f(U)·(Vᵀh)` in `O(|V|·r + d·r)`.
    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_hidden(h, self.dim())?;
        let mut projected = vec![0.0; self.rank()];
        for (k, &hk) in h.iter().enumerate() {
            axpy(hk, self.v.row(k), &mut projected);
        }
        let act = self.activation;
        Ok((0..self.vocab())
            .map(|i| {
                self.u
                    .row(i)
                    .iter()
                    .zip(&projected)
                    .map(|(u, p)| act.apply(*u) * p)
                    .sum()
            })
            .collect())
    }
}
