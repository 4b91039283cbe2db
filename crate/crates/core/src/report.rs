//! Per-method evaluation records.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::factorizations::CompressedEmbedding;
use crate::losses::recon_losses;
use crate::matrix::DenseMatrix;
use crate::trainer::{mean_cross_entropy, Example};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    /// Embedding parameters plus any non-embedding parameters of the model.
    pub params: u64,
    pub emb_params: u64,
    pub compression_rate: f64,
    pub recon_loss_l2: f64,
    pub recon_loss_sq: f64,
    pub heldout_ce: Option<f64>,
    pub seed: u64,
    pub config: Map<String, Value>,
}

/// Optional held-out evaluation: mixing matrix and examples.
pub type Heldout<'a> = Option<(&'a DenseMatrix, &'a [Example])>;

impl Report {
    /// Evaluate `emb` against `teacher`, optionally scoring held-out CE.
    pub fn evaluate(
        method: impl Into<String>,
        emb: &dyn CompressedEmbedding,
        teacher: &DenseMatrix,
        heldout: Heldout<'_>,
        seed: u64,
        config: Map<String, Value>,
    ) -> Result<Self> {
        let (l2, sq) = recon_losses(emb, teacher)?;
        let stats = emb.stats();
        let (extra, heldout_ce) = match heldout {
            Some((w, ex)) => ((w.rows() * w.cols()) as u64, Some(mean_cross_entropy(emb, w, ex)?)),
            None => (0, None),
        };
        Ok(Self {
            method: method.into(),
            params: stats.param_count + extra,
            emb_params: stats.param_count,
            compression_rate: stats.compression_rate,
            recon_loss_l2: l2,
            recon_loss_sq: sq,
            heldout_ce,
            seed,
            config,
        })
    }

    /// Rate as printed in tables, e.g. `7.87x`.
    pub fn rate_label(&self) -> String {
        format!("{}x", crate::factorizations::truncate_2dp(self.compression_rate))
    }
}
