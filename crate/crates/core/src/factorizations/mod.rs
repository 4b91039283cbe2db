//! Compressed embedding representations sharing one lookup/projection interface.

mod grouped;
mod lowrank;
mod pq;
mod tt;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use grouped::{
    group_funneling_fit, groupreduce_fit, rank_schedule, EmbeddingGroup, GroupReduceConfig, GroupReduceFit,
    GroupedEmbedding,
};
pub use lowrank::{init_from_svd, LowRankEmbedding};
pub use pq::{pq_fit, pq_param_count, PqEmbedding, PqFit};
pub use tt::{mixed_radix_index, mixed_radix_inverse, tt_fit, tt_param_count, tt_ranks, TtEmbedding, TtFit};

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Element-wise non-linearity applied to the bottleneck factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative, with the ReLU subgradient at exactly zero taken as 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" | "none" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::arg(format!("unknown activation {other:?}"))),
        }
    }
}

/// Parameter accounting for a compressed embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub param_count: u64,
    /// `|V|·d`
    pub full_param_count: u64,
    /// `full_param_count / param_count`
    pub compression_rate: f64,
}

impl CompressionStats {
    pub fn new(param_count: u64, vocab: usize, dim: usize) -> Self {
        let full = (vocab as u64) * (dim as u64);
        Self {
            param_count,
            full_param_count: full,
            compression_rate: full as f64 / param_count.max(1) as f64,
        }
    }

    /// Low-rank accounting `r·(|V| + d)`.
    pub fn low_rank(vocab: usize, dim: usize, rank: usize) -> Self {
        Self::new((rank * (vocab + dim)) as u64, vocab, dim)
    }

    /// Rate as printed in compression tables: two decimals, truncated.
    pub fn rate_label(&self) -> String {
        format!("{}x", truncate_2dp(self.compression_rate))
    }
}

/// Truncate (not round) to two decimals and format, e.g. `7.874… → "7.87"`.
pub fn truncate_2dp(x: f64) -> String {
    // Nudge by a few ulps so exact values such as 1.1 don't print as 1.09.
    let hundredths = (x * 100.0 * (1.0 + 4.0 * f64::EPSILON)).floor() as i64;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Which compressor produced an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svd,
    Funneling,
    GroupReduce,
    GroupFunneling,
    Pq,
    Tt,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Svd,
        Method::Funneling,
        Method::GroupReduce,
        Method::GroupFunneling,
        Method::Pq,
        Method::Tt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::Funneling => "funneling",
            Method::GroupReduce => "groupreduce",
            Method::GroupFunneling => "groupfunneling",
            Method::Pq => "pq",
            Method::Tt => "tt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown method {s:?}")))
    }
}

/// Shared interface of every compressed embedding.
///
/// `row(i)` and row `i` of `reconstruct()` are bit-identical for every
/// implementation; `logits(h)` is the tied output projection `Ẽ·h`.
pub trait CompressedEmbedding {
    fn vocab(&self) -> usize;
    fn dim(&self) -> usize;
    fn param_count(&self) -> u64;

    /// Write row `i` into `out` (length `dim`). `i` is assumed in range.
    fn write_row(&self, i: usize, out: &mut [f64]);

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.vocab() {
            return Err(Error::arg(format!(
                "word index {i} out of range for vocabulary of {}",
                self.vocab()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.write_row(i, &mut out);
        Ok(out)
    }

    fn reconstruct(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.vocab(), self.dim());
        for i in 0..self.vocab() {
            self.write_row(i, m.row_mut(i));
        }
        m
    }

    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_hidden(h, self.dim())?;
        let mut buf = vec![0.0; self.dim()];
        Ok((0..self.vocab())
            .map(|i| {
                self.write_row(i, &mut buf);
                dot(&buf, h)
            })
            .collect())
    }

    fn stats(&self) -> CompressionStats {
        CompressionStats::new(self.param_count(), self.vocab(), self.dim())
    }
}

/// The uncompressed matrix itself, `|V|·d` parameters.
impl CompressedEmbedding for DenseMatrix {
    fn vocab(&self) -> usize {
        self.rows()
    }

    fn dim(&self) -> usize {
        self.cols()
    }

    fn param_count(&self) -> u64 {
        (self.rows() * self.cols()) as u64
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }

    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_hidden(h, self.cols())?;
        self.matvec(h)
    }
}

pub(crate) fn check_hidden(h: &[f64], dim: usize) -> Result<()> {
    if h.len() != dim {
        return Err(Error::arg(format!(
            "hidden vector has length {}, expected {dim}",
            h.len()
        )));
    }
    Ok(())
}

/// Any fitted embedding, for code paths that dispatch on the method at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyEmbedding {
    LowRank(LowRankEmbedding),
    Grouped(GroupedEmbedding),
    Pq(PqEmbedding),
    Tt(TtEmbedding),
}

impl AnyEmbedding {
    fn inner(&self) -> &dyn CompressedEmbedding {
        match self {
            AnyEmbedding::LowRank(e) => e,
            AnyEmbedding::Grouped(e) => e,
            AnyEmbedding::Pq(e) => e,
            AnyEmbedding::Tt(e) => e,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            AnyEmbedding::LowRank(e) => match e.activation() {
                Activation::Identity => Method::Svd,
                Activation::Relu => Method::Funneling,
            },
            AnyEmbedding::Grouped(g) => {
                if g.groups().iter().any(|grp| grp.activation == Activation::Relu) {
                    Method::GroupFunneling
                } else {
                    Method::GroupReduce
                }
            }
            AnyEmbedding::Pq(_) => Method::Pq,
            AnyEmbedding::Tt(_) => Method::Tt,
        }
    }
}

impl CompressedEmbedding for AnyEmbedding {
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
}

impl From<LowRankEmbedding> for AnyEmbedding {
    fn from(e: LowRankEmbedding) -> Self {
        AnyEmbedding::LowRank(e)
    }
}

impl From<GroupedEmbedding> for AnyEmbedding {
    fn from(e: GroupedEmbedding) -> Self {
        AnyEmbedding::Grouped(e)
    }
}

impl From<PqEmbedding> for AnyEmbedding {
    fn from(e: PqEmbedding) -> Self {
        AnyEmbedding::Pq(e)
    }
}

impl From<TtEmbedding> for AnyEmbedding {
    fn from(e: TtEmbedding) -> Self {
        AnyEmbedding::Tt(e)
    }
}
