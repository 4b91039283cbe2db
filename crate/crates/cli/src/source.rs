//! Where the embedding to compress comes from.

use std::path::Path;

use distemb::embio::{read_embedding_text, read_frequencies};
use distemb::linalg::gaussian_matrix;
use distemb::trainer::{gen_corpus, pretrain_full, Corpus, Example, TrainConfig};
use distemb::DenseMatrix;

use crate::args::{GenArgs, Shape};
use crate::error::{at, config, CliResult};

pub struct Source {
    pub e: DenseMatrix,
    /// GroupReduce row weights, all ≥ 1.
    pub freqs: Vec<f64>,
    /// Mixing matrix and held-out examples when a toy model is available.
    pub heldout: Option<(DenseMatrix, Vec<Example>)>,
    /// Human-readable provenance for the report config.
    pub label: String,
}

/// Counts of zero become 1 so every word keeps a positive weight.
fn weights(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&c| c.max(1) as f64).collect()
}

pub fn from_file(path: &Path, freqs: Option<&Path>, warn: &mut dyn FnMut(&str)) -> CliResult<Source> {
    let (e, tokens) = read_embedding_text(path).map_err(at(path))?;
    let freqs = match freqs {
        Some(f) => {
            let table = read_frequencies(f, &tokens).map_err(at(f))?;
            table.warnings.iter().for_each(|w| warn(w));
            weights(&table.counts)
        }
        None => vec![1.0; e.rows()],
    };
    Ok(Source {
        e,
        freqs,
        heldout: None,
        label: path.display().to_string(),
    })
}

pub fn synthetic(shape: Shape, seed: u64) -> Source {
    Source {
        e: gaussian_matrix(shape.vocab, shape.dim, seed, 1.0),
        freqs: vec![1.0; shape.vocab],
        heldout: None,
        label: format!("gaussian {}x{} seed {seed}", shape.vocab, shape.dim),
    }
}

pub fn generate_corpus(g: &GenArgs, seed: u64) -> CliResult<Corpus> {
    if g.vocab < 2 || g.examples == 0 || g.context == 0 {
        return Err(config("--vocab must be ≥ 2, --examples and --context ≥ 1"));
    }
    if !(g.zipf >= 0.0 && g.zipf.is_finite()) {
        return Err(config(format!("--zipf {} must be a non-negative number", g.zipf)));
    }
    Ok(gen_corpus(g.vocab, g.examples, g.context, g.zipf, seed)?)
}

/// Pre-train the toy model on a generated corpus and use its embedding.
pub fn pretrained(g: &GenArgs, dim: usize, cfg: &TrainConfig, heldout_fraction: f64) -> CliResult<Source> {
    let corpus = generate_corpus(g, cfg.seed)?;
    let (train, held) = corpus.split(heldout_fraction)?;
    let p = pretrain_full(&train, dim, cfg)?;
    Ok(Source {
        freqs: weights(&train.frequencies()),
        heldout: Some((p.w, held.examples)),
        e: p.e,
        label: format!("toy model vocab {} dim {dim} seed {}", g.vocab, cfg.seed),
    })
}
