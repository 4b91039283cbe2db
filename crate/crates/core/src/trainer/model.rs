//! Desk-scale downstream model with a tied input/output embedding.
//!
//! `h = W·mean(ẽ_c for c in context)`, `logits = Ẽ·h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorizations::{CompressedEmbedding, LowRankEmbedding};
use crate::losses::cross_entropy;
use crate::matrix::{axpy, DenseMatrix};

/// One flattened sequence position: context words and the word to predict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub context: Vec<u32>,
    pub target: u32,
}

/// Trainable embedding of the toy model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelEmbedding {
    Full(DenseMatrix),
    LowRank(LowRankEmbedding),
}

impl ModelEmbedding {
    fn inner(&self) -> &dyn CompressedEmbedding {
        match self {
            ModelEmbedding::Full(m) => m,
            ModelEmbedding::LowRank(e) => e,
        }
    }

    pub fn as_low_rank(&self) -> Option<&LowRankEmbedding> {
        match self {
            ModelEmbedding::LowRank(e) => Some(e),
            ModelEmbedding::Full(_) => None,
        }
    }
}

impl CompressedEmbedding for ModelEmbedding {
    fn vocab(&self) -> usize {
        self.inner().vocab()
    }
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn param_count(&self) -> u64 {
        self.inner().param_count()
    }
    fn write_row(&self, i: usize, out: &mut [f64]) {
        self.inner().write_row(i, out)
    }
    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.inner().logits(h)
    }
    fn reconstruct(&self) -> DenseMatrix {
        match self {
            ModelEmbedding::Full(m) => m.clone(),
            ModelEmbedding::LowRank(e) => e.reconstruct(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTiedModel {
    pub emb: ModelEmbedding,
    /// `d×d` mixing matrix standing in for the task network.
    pub w: DenseMatrix,
    pub context_size: usize,
}

impl ToyTiedModel {
    pub fn new(emb: ModelEmbedding, w: DenseMatrix, context_size: usize) -> Result<Self> {
        let d = emb.dim();
        if w.shape() != (d, d) {
            return Err(Error::arg(format!(
                "mixing matrix is {:?}, expected {d}x{d}",
                w.shape()
            )));
        }
        if context_size == 0 {
            return Err(Error::arg("context size must be at least 1"));
        }
        Ok(Self { emb, w, context_size })
    }

    pub fn vocab(&self) -> usize {
        self.emb.vocab()
    }

    pub fn dim(&self) -> usize {
        self.emb.dim()
    }

    /// Total parameter count: embedding plus mixing matrix.
    pub fn param_count(&self) -> u64 {
        self.emb.param_count() + (self.w.rows() * self.w.cols()) as u64
    }

    /// Hidden state for a context.
    pub fn hidden(&self, context: &[u32]) -> Result<Vec<f64>> {
        hidden_with(&self.emb, &self.w, context)
    }

    pub fn logits(&self, context: &[u32]) -> Result<Vec<f64>> {
        self.emb.logits(&self.hidden(context)?)
    }
}

/// Mean cross-entropy (nats, no smoothing) of `(emb, w)` over `examples`.
pub fn mean_cross_entropy(emb: &dyn CompressedEmbedding, w: &DenseMatrix, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::arg("no examples to evaluate"));
    }
    let mut total = 0.0;
    for ex in examples {
        let h = hidden_with(emb, w, &ex.context)?;
        let logits = emb.logits(&h)?;
        total += cross_entropy(&logits, ex.target as usize, 0.0)?;
    }
    Ok(total / examples.len() as f64)
}

fn hidden_with(emb: &dyn CompressedEmbedding, w: &DenseMatrix, context: &[u32]) -> Result<Vec<f64>> {
    if context.is_empty() {
        return Err(Error::arg("empty context"));
    }
    let mut x = vec![0.0; emb.dim()];
    let inv = 1.0 / context.len() as f64;
    for &c in context {
        axpy(inv, &emb.row(c as usize)?, &mut x);
    }
    w.matvec(&x)
}
