//! Synthetic next-word corpus with a planted structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, DenseMatrix};
use crate::rng::SplitMix64;
use crate::trainer::Example;

/// Dimension of the hidden ground-truth embedding used to plant targets.
pub const PLANTED_DIM: usize = 8;
/// Inverse temperature of the planted target distribution.
pub const PLANTED_SHARPNESS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub vocab_size: usize,
    pub context_size: usize,
    pub examples: Vec<Example>,
}

impl Corpus {
    pub fn new(vocab_size: usize, context_size: usize, examples: Vec<Example>) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::arg("vocabulary must contain at least 2 words"));
        }
        for (n, ex) in examples.iter().enumerate() {
            if ex.context.len() != context_size {
                return Err(Error::arg(format!(
                    "example {n} has {} context words, expected {context_size}",
                    ex.context.len()
                )));
            }
            let bad = ex
                .context
                .iter()
                .chain(std::iter::once(&ex.target))
                .find(|&&w| w as usize >= vocab_size);
            if let Some(w) = bad {
                return Err(Error::arg(format!("example {n}: word {w} >= vocab {vocab_size}")));
            }
        }
        Ok(Self {
            vocab_size,
            context_size,
            examples,
        })
    }

    /// Occurrences of every word as a context word.
    pub fn frequencies(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size];
        for ex in &self.examples {
            for &c in &ex.context {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    /// Split off the trailing `fraction` of examples as a held-out set.
    pub fn split(&self, fraction: f64) -> Result<(Corpus, Corpus)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::arg(format!("held-out fraction {fraction} outside [0, 1)")));
        }
        let n_held = (self.examples.len() as f64 * fraction).round() as usize;
        let cut = self.examples.len() - n_held;
        let part = |ex: &[Example]| Corpus {
            vocab_size: self.vocab_size,
            context_size: self.context_size,
            examples: ex.to_vec(),
        };
        Ok((part(&self.examples[..cut]), part(&self.examples[cut..])))
    }
}

/// Generate a corpus whose targets follow a planted linear map.
///
/// A hidden embedding `G` (`|V|×8`) and map `M` are drawn from the seed.
/// Context words are i.i.d. Zipf(`zipf_exponent`); the target is sampled from
/// `softmax(3·G·M·mean(G[context]) + log zipf)`.
pub fn gen_corpus(
    vocab_size: usize,
    n_examples: usize,
    context_size: usize,
    zipf_exponent: f64,
    seed: u64,
) -> Result<Corpus> {
    if vocab_size < 2 {
        return Err(Error::arg("vocabulary must contain at least 2 words"));
    }
    if context_size == 0 {
        return Err(Error::arg("context size must be at least 1"));
    }
    if !(zipf_exponent >= 0.0) {
        return Err(Error::arg(format!("zipf exponent {zipf_exponent} must be >= 0")));
    }
    let mut rng = SplitMix64::new(seed);
    let hidden = DenseMatrix::from_fn(vocab_size, PLANTED_DIM, |_, _| rng.normal());
    let scale = 1.0 / (PLANTED_DIM as f64).sqrt();
    let map = DenseMatrix::from_fn(PLANTED_DIM, PLANTED_DIM, |_, _| scale * rng.normal());

    let weights: Vec<f64> = (0..vocab_size).map(|v| (v as f64 + 1.0).powf(-zipf_exponent)).collect();
    let total: f64 = weights.iter().sum();
    let log_prior: Vec<f64> = weights.iter().map(|w| (w / total).ln()).collect();
    let mut cdf = Vec::with_capacity(vocab_size);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let draw_zipf = |rng: &mut SplitMix64| -> u32 {
        let u = rng.next_f64();
        cdf.partition_point(|&c| c <= u).min(vocab_size - 1) as u32
    };

    let mut examples = Vec::with_capacity(n_examples);
    let mut x = vec![0.0; PLANTED_DIM];
    let mut logits = vec![0.0; vocab_size];
    for _ in 0..n_examples {
        let context: Vec<u32> = (0..context_size).map(|_| draw_zipf(&mut rng)).collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        for &c in &context {
            axpy(1.0 / context_size as f64, hidden.row(c as usize), &mut x);
        }
        let h = map.matvec(&x)?;
        for (v, z) in logits.iter_mut().enumerate() {
            *z = PLANTED_SHARPNESS * crate::matrix::dot(hidden.row(v), &h) + log_prior[v];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let target = rng.weighted_index(&probs).expect("softmax has positive mass") as u32;
        examples.push(Example { context, target });
    }
    Corpus::new(vocab_size, context_size, examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = gen_corpus(32, 100, 3, 1.0, 4).unwrap();
        let b = gen_corpus(32, 100, 3, 1.0, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_corpus(32, 100, 3, 1.0, 5).unwrap());
    }

    #[test]
    fn zipf_zero_is_uniform() {
        let c = gen_corpus(20, 100_000, 1, 0.0, 2).unwrap();
        let f = c.frequencies();
        let expect = 100_000.0 / 20.0;
        for (w, &n) in f.iter().enumerate() {
            let rel = (n as f64 - expect).abs() / expect;
            assert!(rel <= 0.10, "word {w}: {n}");
        }
    }

    #[test]
    fn zipf_skews_toward_low_indices() {
        let c = gen_corpus(50, 20_000, 2, 1.2, 3).unwrap();
        let f = c.frequencies();
        assert!(f[0] > 5 * f[40]);
    }

    #[test]
    fn split_keeps_order() {
        let c = gen_corpus(10, 50, 2, 1.0, 1).unwrap();
        let (train, held) = c.split(0.2).unwrap();
        assert_eq!(train.examples.len(), 40);
        assert_eq!(held.examples.len(), 10);
        assert_eq!(held.examples[0], c.examples[40]);
        assert!(c.split(1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(gen_corpus(1, 10, 2, 1.0, 0).is_err());
        let bad = Example {
            context: vec![0, 9],
            target: 1,
        };
        assert!(Corpus::new(5, 2, vec![bad]).is_err());
    }
}
