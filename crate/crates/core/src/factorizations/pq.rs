//! Product quantization (structured embedding).

use crate::error::{Error, Result};
use crate::factorizations::CompressedEmbedding;
use crate::linalg::{kmeans, KMeansConfig};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;

/// Every row is split into `d / group_size` contiguous subvectors, each
/// replaced by a codeword from the codebook of its position.
#[derive(Debug, Clone, PartialEq)]
pub struct PqEmbedding {
    vocab: usize,
    group_size: usize,
    /// One `n_clusters×group_size` codebook per subvector position.
    codebooks: Vec<DenseMatrix>,
    /// Row-major `vocab×n_subvectors` codeword indices.
    assignments: Vec<u32>,
}

impl PqEmbedding {
    pub fn new(vocab: usize, group_size: usize, codebooks: Vec<DenseMatrix>, assignments: Vec<u32>) -> Result<Self> {
        let s = codebooks.len();
        if s == 0 || group_size == 0 {
            return Err(Error::arg("product quantizer needs at least one subvector"));
        }
        let k = codebooks[0].rows();
        if codebooks.iter().any(|c| c.shape() != (k, group_size)) {
            return Err(Error::arg("codebooks must all be n_clusters×group_size"));
        }
        if assignments.len() != vocab * s {
            return Err(Error::arg(format!(
                "{} assignment entries, expected {vocab}×{s}",
                assignments.len()
            )));
        }
        if let Some(a) = assignments.iter().find(|&&a| a as usize >= k) {
            return Err(Error::arg(format!("assignment {a} >= n_clusters {k}")));
        }
        Ok(Self {
            vocab,
            group_size,
            codebooks,
            assignments,
        })
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn n_subvectors(&self) -> usize {
        self.codebooks.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.codebooks[0].rows()
    }

    pub fn codebooks(&self) -> &[DenseMatrix] {
        &self.codebooks
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }
}

/// Codebook entries plus one parameter per index-matrix entry:
/// `s·n_clusters·group_size + |V|·s`.
pub fn pq_param_count(vocab: usize, dim: usize, group_size: usize, n_clusters: usize) -> u64 {
    let s = (dim / group_size) as u64;
    s * (n_clusters * group_size) as u64 + vocab as u64 * s
}

impl CompressedEmbedding for PqEmbedding {
    fn vocab(&self) -> usize {
        self.vocab
    }

    fn dim(&self) -> usize {
        self.group_size * self.codebooks.len()
    }

    fn param_count(&self) -> u64 {
        pq_param_count(self.vocab, self.dim(), self.group_size, self.n_clusters())
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        let s = self.codebooks.len();
        for (p, chunk) in out.chunks_exact_mut(self.group_size).enumerate() {
            let code = self.assignments[i * s + p] as usize;
            chunk.copy_from_slice(self.codebooks[p].row(code));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqFit {
    pub embedding: PqEmbedding,
    /// Final k-means objective of each subvector position.
    pub objectives: Vec<f64>,
}

/// Learn one k-means codebook per subvector position.
///
/// The total squared reconstruction error equals the sum of the returned
/// per-position objectives.
pub fn pq_fit(e: &DenseMatrix, group_size: usize, n_clusters: usize, seed: u64) -> Result<PqFit> {
    let (vocab, dim) = e.shape();
    if group_size == 0 || group_size > dim {
        return Err(Error::arg(format!("group size {group_size} must be in 1..={dim}")));
    }
    if dim % group_size != 0 {
        return Err(Error::arg(format!(
            "embedding dim {dim} is not divisible by group size {group_size}"
        )));
    }
    if n_clusters == 0 || n_clusters > vocab {
        return Err(Error::arg(format!("n_clusters {n_clusters} must be in 1..={vocab}")));
    }
    let s = dim / group_size;
    let mut codebooks = Vec::with_capacity(s);
    let mut objectives = Vec::with_capacity(s);
    let mut assignments = vec![0u32; vocab * s];
    for p in 0..s {
        let sub = e.column_block(p * group_size, (p + 1) * group_size);
        let cfg = KMeansConfig {
            seed: SplitMix64::derive(seed, p as u64).next_u64(),
            ..KMeansConfig::default()
        };
        let km = kmeans(&sub, n_clusters, cfg)?;
        for (i, &a) in km.assignments.iter().enumerate() {
            assignments[i * s + p] = a as u32;
        }
        codebooks.push(km.centroids);
        objectives.push(km.objective);
    }
    Ok(PqFit {
        embedding: PqEmbedding::new(vocab, group_size, codebooks, assignments)?,
        objectives,
    })
}
