//! GroupReduce: frequency-driven vocabulary partitioning with a weighted
//! low-rank factorization per group, and its funneling variant.

use crate::error::{Error, Result};
use crate::factorizations::{Activation, CompressedEmbedding, LowRankEmbedding};
use crate::linalg::weighted_low_rank;
use crate::matrix::{dot, DenseMatrix};
use crate::trainer::{fit_reconstruction, InitMode, TrainConfig};

/// One vocabulary group with its own factorization `f(Uᵢ)·Vᵢᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGroup {
    /// Global word indices, in the row order of `u`.
    pub words: Vec<usize>,
    /// `|Vᵢ|×rᵢ`
    pub u: DenseMatrix,
    /// `d×rᵢ`
    pub v: DenseMatrix,
    pub activation: Activation,
}

impl EmbeddingGroup {
    pub fn rank(&self) -> usize {
        self.v.cols()
    }

    fn param_count(&self) -> u64 {
        (self.rank() * (self.words.len() + self.v.rows())) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedEmbedding {
    vocab: usize,
    dim: usize,
    groups: Vec<EmbeddingGroup>,
    /// word → (group, row within group)
    lookup: Vec<(u32, u32)>,
}

impl GroupedEmbedding {
    /// Validates that the groups' word lists form a disjoint cover of `0..vocab`.
    pub fn new(vocab: usize, dim: usize, groups: Vec<EmbeddingGroup>) -> Result<Self> {
        const UNSET: (u32, u32) = (u32::MAX, u32::MAX);
        let mut lookup = vec![UNSET; vocab];
        for (g, grp) in groups.iter().enumerate() {
            if grp.v.rows() != dim || grp.u.cols() != grp.v.cols() || grp.u.rows() != grp.words.len() {
                return Err(Error::arg(format!("group {g} has inconsistent factor shapes")));
            }
            if grp.rank() == 0 || grp.rank() > dim {
                return Err(Error::arg(format!("group {g} rank {} outside 1..={dim}", grp.rank())));
            }
            for (local, &w) in grp.words.iter().enumerate() {
                if w >= vocab {
                    return Err(Error::arg(format!("group {g} contains word {w} >= {vocab}")));
                }
                if lookup[w] != UNSET {
                    return Err(Error::arg(format!("word {w} appears in more than one group")));
                }
                lookup[w] = (g as u32, local as u32);
            }
        }
        if let Some(w) = lookup.iter().position(|x| *x == UNSET) {
            return Err(Error::arg(format!("word {w} is not covered by any group")));
        }
        Ok(Self {
            vocab,
            dim,
            groups,
            lookup,
        })
    }

    pub fn groups(&self) -> &[EmbeddingGroup] {
        &self.groups
    }

    pub fn partitions(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(|g| g.words.clone()).collect()
    }

    /// Group index of every word.
    pub fn group_of(&self, word: usize) -> usize {
        self.lookup[word].0 as usize
    }
}

impl CompressedEmbedding for GroupedEmbedding {
    fn vocab(&self) -> usize {
        self.vocab
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn param_count(&self) -> u64 {
        self.groups.iter().map(EmbeddingGroup::param_count).sum()
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        let (g, local) = self.lookup[i];
        let grp = &self.groups[g as usize];
        let act = grp.activation;
        let ui = grp.u.row(local as usize);
        for (k, o) in out.iter_mut().enumerate() {
            *o = grp.v.row(k).iter().zip(ui).map(|(vk, uk)| act.apply(*uk) * vk).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupReduceConfig {
    /// Number of groups `c`.
    pub clusters: usize,
    pub r_min: usize,
    pub r_max: usize,
    pub refine_iters: usize,
}

impl Default for GroupReduceConfig {
    fn default() -> Self {
        Self {
            clusters: 10,
            r_min: 22,
            r_max: 22,
            refine_iters: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReduceFit {
    pub embedding: GroupedEmbedding,
    /// Total weighted squared error after the initial fit and after each refinement round.
    pub error_history: Vec<f64>,
}

/// Linear rank schedule over groups ordered by ascending average frequency:
/// the group at position `idx` gets `r_min + round(idx/(c−1)·(r_max−r_min))`.
pub fn rank_schedule(avg_freq: &[f64], r_min: usize, r_max: usize) -> Vec<usize> {
    let c = avg_freq.len();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| avg_freq[a].total_cmp(&avg_freq[b]));
    let mut ranks = vec![r_min; c];
    if c > 1 {
        for (idx, &g) in order.iter().enumerate() {
            let step = (idx as f64 / (c - 1) as f64) * (r_max - r_min) as f64;
            ranks[g] = r_min + step.round() as usize;
        }
    }
    ranks
}

struct WorkingGroup {
    words: Vec<usize>,
    rank: usize,
    /// `d×r_eff`, orthonormal columns; empty until first fit.
    v: DenseMatrix,
    u: DenseMatrix,
}

impl WorkingGroup {
    fn fit(&mut self, e: &DenseMatrix, weights: &[f64]) -> Result<()> {
        if self.words.is_empty() {
            // Keep the last basis so words can still be reassigned here.
            self.u = DenseMatrix::zeros(0, self.v.cols());
            return Ok(());
        }
        let rows = e.select_rows(&self.words);
        let w: Vec<f64> = self.words.iter().map(|&i| weights[i]).collect();
        let r = self.rank.min(self.words.len()).min(e.cols());
        let (u, v) = weighted_low_rank(&rows, &w, r)?;
        self.u = u;
        self.v = v;
        Ok(())
    }

    /// Squared residual of projecting `x` onto this group's basis.
    fn projection_error(&self, x: &[f64]) -> f64 {
        let mut resid = x.to_vec();
        for j in 0..self.v.cols() {
            let c: f64 = (0..self.v.rows()).map(|k| self.v[(k, j)] * x[k]).sum();
            for (k, r) in resid.iter_mut().enumerate() {
                *r -= c * self.v[(k, j)];
            }
        }
        dot(&resid, &resid)
    }

    fn weighted_error(&self, e: &DenseMatrix, weights: &[f64]) -> f64 {
        let approx = self.u.matmul_t(&self.v).expect("conformant");
        self.words
            .iter()
            .enumerate()
            .map(|(local, &w)| {
                let d: f64 = e
                    .row(w)
                    .iter()
                    .zip(approx.row(local))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                weights[w] * d
            })
            .sum()
    }
}

/// Fit GroupReduce.
///
/// Words are sorted by descending frequency and cut into `c` contiguous
/// blocks of near-equal size. Each block gets a rank from [`rank_schedule`]
/// and a frequency-weighted low-rank factorization. Refinement rounds then
/// move every word to the group whose basis reconstructs it with the least
/// weighted error and refit all groups; the total weighted error never
/// increases. Groups left empty by refinement are dropped from the result.
pub fn groupreduce_fit(e: &DenseMatrix, freqs: &[f64], config: GroupReduceConfig) -> Result<GroupReduceFit> {
    let (vocab, dim) = e.shape();
    let GroupReduceConfig {
        clusters: c,
        r_min,
        r_max,
        refine_iters,
    } = config;
    if freqs.len() != vocab {
        return Err(Error::arg(format!("{} frequencies for {vocab} words", freqs.len())));
    }
    if c == 0 || c > vocab {
        return Err(Error::arg(format!("cluster count {c} must be in 1..={vocab}")));
    }
    if r_min == 0 || r_min > r_max || r_max > dim {
        return Err(Error::arg(format!(
            "ranks must satisfy 1 <= r_min ({r_min}) <= r_max ({r_max}) <= d ({dim})"
        )));
    }
    if let Some(f) = freqs.iter().find(|f| !(**f > 0.0) || !f.is_finite()) {
        return Err(Error::arg(format!("word frequencies must be positive, got {f}")));
    }

    let mut by_freq: Vec<usize> = (0..vocab).collect();
    by_freq.sort_by(|&a, &b| freqs[b].total_cmp(&freqs[a]));
    let (base, extra) = (vocab / c, vocab % c);
    let mut blocks = Vec::with_capacity(c);
    let mut start = 0;
    for g in 0..c {
        let len = base + usize::from(g < extra);
        let mut words = by_freq[start..start + len].to_vec();
        words.sort_unstable();
        blocks.push(words);
        start += len;
    }
    let avg: Vec<f64> = blocks
        .iter()
        .map(|b| b.iter().map(|&w| freqs[w]).sum::<f64>() / b.len() as f64)
        .collect();
    let ranks = rank_schedule(&avg, r_min, r_max);

    let mut groups: Vec<WorkingGroup> = blocks
        .into_iter()
        .zip(ranks)
        .map(|(words, rank)| WorkingGroup {
            words,
            rank,
            v: DenseMatrix::zeros(dim, 0),
            u: DenseMatrix::zeros(0, 0),
        })
        .collect();
    for g in &mut groups {
        g.fit(e, freqs)?;
    }
    let total = |groups: &[WorkingGroup]| -> f64 { groups.iter().map(|g| g.weighted_error(e, freqs)).sum() };
    let mut error_history = vec![total(&groups)];

    let mut membership = vec![0usize; vocab];
    for (g, grp) in groups.iter().enumerate() {
        for &w in &grp.words {
            membership[w] = g;
        }
    }

    for _ in 0..refine_iters {
        let mut moved = false;
        let mut next = membership.clone();
        for w in 0..vocab {
            let x = e.row(w);
            let current = membership[w];
            let mut best = current;
            let mut best_err = groups[current].projection_error(x);
            for (g, grp) in groups.iter().enumerate() {
                if g == current || grp.v.cols() == 0 {
                    continue;
                }
                let err = grp.projection_error(x);
                if err < best_err {
                    best_err = err;
                    best = g;
                }
            }
            if best != current {
                moved = true;
                next[w] = best;
            }
        }
        if !moved {
            break;
        }
        // An emptied group takes the worst-reconstructed word that does not
        // leave its own group empty.
        let mut sizes = vec![0usize; groups.len()];
        next.iter().for_each(|&g| sizes[g] += 1);
        for g in 0..groups.len() {
            if sizes[g] > 0 {
                continue;
            }
            let worst = (0..vocab)
                .filter(|&w| sizes[next[w]] > 1)
                .map(|w| (w, freqs[w] * groups[next[w]].projection_error(e.row(w))))
                .fold(None, |best: Option<(usize, f64)>, (w, err)| match best {
                    Some((_, b)) if b >= err => best,
                    _ => Some((w, err)),
                });
            if let Some((w, _)) = worst {
                sizes[next[w]] -= 1;
                sizes[g] = 1;
                next[w] = g;
            }
        }
        membership = next;
        for grp in &mut groups {
            grp.words.clear();
        }
        for (w, &g) in membership.iter().enumerate() {
            groups[g].words.push(w);
        }
        for g in &mut groups {
            g.fit(e, freqs)?;
        }
        error_history.push(total(&groups));
    }

    let groups = groups
        .into_iter()
        .filter(|g| !g.words.is_empty())
        .map(|g| EmbeddingGroup {
            words: g.words,
            u: g.u,
            v: g.v,
            activation: Activation::Identity,
        })
        .collect();
    Ok(GroupReduceFit {
        embedding: GroupedEmbedding::new(vocab, dim, groups)?,
        error_history,
    })
}

/// GroupFunneling: one randomly initialized funneling factorization per
/// partition, each fitted on the reconstruction loss of its own rows.
pub fn group_funneling_fit(
    e: &DenseMatrix,
    partitions: &[Vec<usize>],
    r: usize,
    activation: Activation,
    config: &TrainConfig,
) -> Result<GroupedEmbedding> {
    let (vocab, dim) = e.shape();
    let mut groups = Vec::with_capacity(partitions.len());
    for (g, words) in partitions.iter().enumerate() {
        if words.is_empty() {
            return Err(Error::arg(format!("partition {g} is empty")));
        }
        if let Some(&w) = words.iter().find(|&&w| w >= vocab) {
            return Err(Error::arg(format!("partition {g} contains word {w} >= {vocab}")));
        }
        let rows = e.select_rows(words);
        let cfg = TrainConfig {
            init: InitMode::Random,
            seed: config.seed.wrapping_add(g as u64),
            ..config.clone()
        };
        let fit = fit_reconstruction(&rows, r, activation, &cfg)?;
        let (u, v, activation) = fit.embedding.into_factors();
        groups.push(EmbeddingGroup {
            words: words.clone(),
            u,
            v,
            activation,
        });
    }
    GroupedEmbedding::new(vocab, dim, groups)
}

impl From<LowRankEmbedding> for EmbeddingGroup {
    /// Single group covering the whole vocabulary.
    fn from(emb: LowRankEmbedding) -> Self {
        let words = (0..emb.vocab()).collect();
        let (u, v, activation) = emb.into_factors();
        EmbeddingGroup {
            words,
            u,
            v,
            activation,
        }
    }
}
