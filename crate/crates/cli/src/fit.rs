//! Resolved per-method settings, validation, accounting and fitting.

use distemb::factorizations::{
    group_funneling_fit, groupreduce_fit, init_from_svd, pq_fit, pq_param_count, tt_fit, tt_param_count, Activation,
    GroupReduceConfig,
};
use distemb::trainer::{fit_reconstruction, InitMode, TrainConfig};
use distemb::{AnyEmbedding, DenseMatrix, Method};
use serde_json::{json, Map, Value};

use crate::args::FitArgs;
use crate::error::{config, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub rank: usize,
    pub activation: Option<Activation>,
    pub init: InitMode,
    pub clusters: usize,
    pub r_min: usize,
    pub r_max: usize,
    pub refine_iters: usize,
    pub group_size: usize,
    pub n_clusters: usize,
    pub vocab_shape: Vec<usize>,
    pub dim_shape: Vec<usize>,
    pub tt_rank: usize,
    pub train: TrainConfig,
}

impl FitOptions {
    /// Fill defaults that depend on the embedding shape.
    pub fn resolve(a: &FitArgs, vocab: usize, dim: usize) -> Self {
        let r_min = a.r_min.unwrap_or(a.rank);
        Self {
            rank: a.rank,
            activation: a.activation,
            init: a.init,
            clusters: a.clusters,
            r_min,
            r_max: a.r_max.unwrap_or(r_min),
            refine_iters: a.refine_iters,
            group_size: a.group_size,
            n_clusters: a.n_clusters,
            vocab_shape: if a.vocab_shape.is_empty() {
                auto_vocab_shape(vocab)
            } else {
                a.vocab_shape.clone()
            },
            dim_shape: if a.dim_shape.is_empty() {
                auto_dim_shape(dim)
            } else {
                a.dim_shape.clone()
            },
            tt_rank: a.tt_rank,
            train: a.train.config(),
        }
    }

    fn activation_for(&self, method: Method) -> Activation {
        match method {
            Method::Svd => Activation::Identity,
            _ => self.activation.unwrap_or(Activation::Relu),
        }
    }
}

/// Smallest `a` with `a³ ≥ v`, then `b` with `a·b² ≥ v`, then `c = ⌈v/(a·b)⌉`.
pub fn auto_vocab_shape(v: usize) -> Vec<usize> {
    let a = (1..).find(|a: &usize| a.pow(3) >= v).expect("finite");
    let rest = v.div_ceil(a);
    let b = (1..).find(|b: &usize| b * b >= rest).expect("finite");
    vec![a, b, v.div_ceil(a * b).max(1)]
}

/// Exact 3-factor split of `d` with the smallest largest factor.
pub fn auto_dim_shape(d: usize) -> Vec<usize> {
    let mut best = vec![1, 1, d];
    for a in (1..=d).filter(|a| d.is_multiple_of(*a)) {
        for b in (1..=d / a).filter(|b| (d / a).is_multiple_of(*b)) {
            let c = d / a / b;
            let cand = vec![a, b, c];
            let key = |s: &Vec<usize>| *s.iter().max().expect("3 factors");
            if key(&cand) < key(&best) {
                best = cand;
            }
        }
    }
    best
}

fn in_range(name: &str, x: usize, lo: usize, hi: usize) -> CliResult<()> {
    if x < lo || x > hi {
        return Err(config(format!("--{name} {x} is out of range {lo}..={hi}")));
    }
    Ok(())
}

/// Range checks for `method` on a `vocab × dim` embedding, before any work.
pub fn validate(method: Method, s: &FitOptions, vocab: usize, dim: usize) -> CliResult<()> {
    let trains = matches!(method, Method::Funneling | Method::GroupFunneling);
    match method {
        Method::Svd | Method::Funneling => in_range("rank", s.rank, 1, dim.min(vocab))?,
        Method::GroupReduce | Method::GroupFunneling => {
            in_range("clusters", s.clusters, 1, vocab)?;
            in_range("r-min", s.r_min, 1, dim)?;
            in_range("r-max", s.r_max, s.r_min, dim)?;
            if method == Method::GroupFunneling {
                in_range("rank", s.rank, 1, dim)?;
            }
        }
        Method::Pq => {
            in_range("group-size", s.group_size, 1, dim)?;
            if !dim.is_multiple_of(s.group_size) {
                return Err(config(format!(
                    "--group-size {} does not divide dim {dim}",
                    s.group_size
                )));
            }
            in_range("n-clusters", s.n_clusters, 1, vocab)?;
        }
        Method::Tt => {
            if s.vocab_shape.len() != s.dim_shape.len() || s.vocab_shape.is_empty() {
                return Err(config("--vocab-shape and --dim-shape need the same number of factors"));
            }
            if s.vocab_shape.iter().chain(&s.dim_shape).any(|&x| x == 0) {
                return Err(config("shape factors must be positive"));
            }
            let pv: usize = s.vocab_shape.iter().product();
            let pd: usize = s.dim_shape.iter().product();
            if pv < vocab {
                return Err(config(format!("--vocab-shape multiplies to {pv} < vocab {vocab}")));
            }
            if pd != dim {
                return Err(config(format!("--dim-shape multiplies to {pd}, dim is {dim}")));
            }
            in_range("tt-rank", s.tt_rank, 1, usize::MAX)?;
        }
    }
    if trains {
        s.train.validate().map_err(|e| config(e.to_string()))?;
    }
    Ok(())
}

/// Parameter count `method` would have, without fitting. `None` when it
/// depends on the fit (GroupReduce with unequal ranks).
pub fn planned_params(method: Method, s: &FitOptions, vocab: usize, dim: usize) -> Option<u64> {
    let c = s.clusters.min(vocab);
    match method {
        Method::Svd | Method::Funneling => Some((s.rank * (vocab + dim)) as u64),
        Method::GroupReduce if s.r_min == s.r_max => Some((s.r_min * (vocab + c * dim)) as u64),
        Method::GroupReduce => None,
        Method::GroupFunneling => Some((s.rank * (vocab + c * dim)) as u64),
        Method::Pq => Some(pq_param_count(vocab, dim, s.group_size, s.n_clusters)),
        Method::Tt => Some(tt_param_count(&s.vocab_shape, &s.dim_shape, s.tt_rank)),
    }
}

pub struct Fitted {
    pub embedding: AnyEmbedding,
    /// Method knobs and fit diagnostics for the report.
    pub config: Map<String, Value>,
}

fn init_name(i: InitMode) -> &'static str {
    match i {
        InitMode::Svd => "svd",
        InitMode::Random => "random",
    }
}

/// Fit `method` to `e`. `freqs` weights GroupReduce rows.
pub fn fit(method: Method, e: &DenseMatrix, freqs: &[f64], s: &FitOptions) -> CliResult<Fitted> {
    let (vocab, dim) = e.shape();
    validate(method, s, vocab, dim)?;
    let act = s.activation_for(method);
    let mut cfg = Map::new();
    cfg.insert("method".into(), json!(method.name()));
    let train_cfg = |cfg: &mut Map<String, Value>, t: &TrainConfig| {
        cfg.insert("steps".into(), json!(t.steps));
        cfg.insert("lr".into(), json!(t.learning_rate));
        cfg.insert("final_lr_fraction".into(), json!(t.final_lr_fraction));
    };
    let gr = GroupReduceConfig {
        clusters: s.clusters,
        r_min: s.r_min,
        r_max: s.r_max,
        refine_iters: s.refine_iters,
    };
    let embedding = match method {
        Method::Svd => {
            cfg.insert("rank".into(), json!(s.rank));
            init_from_svd(e, s.rank, Activation::Identity)?.into()
        }
        Method::Funneling => {
            cfg.insert("rank".into(), json!(s.rank));
            cfg.insert("activation".into(), json!(act.name()));
            cfg.insert("init".into(), json!(init_name(s.init)));
            train_cfg(&mut cfg, &s.train);
            let t = TrainConfig {
                init: s.init,
                ..s.train.clone()
            };
            let r = fit_reconstruction(e, s.rank, act, &t)?;
            cfg.insert("initial_recon".into(), json!(r.initial_loss));
            r.embedding.into()
        }
        Method::GroupReduce => {
            cfg.insert("clusters".into(), json!(s.clusters));
            cfg.insert("r_min".into(), json!(s.r_min));
            cfg.insert("r_max".into(), json!(s.r_max));
            cfg.insert("refine_iters".into(), json!(s.refine_iters));
            let f = groupreduce_fit(e, freqs, gr)?;
            cfg.insert("weighted_error".into(), json!(f.error_history));
            f.embedding.into()
        }
        Method::GroupFunneling => {
            cfg.insert("clusters".into(), json!(s.clusters));
            cfg.insert("rank".into(), json!(s.rank));
            cfg.insert("activation".into(), json!(act.name()));
            train_cfg(&mut cfg, &s.train);
            let gr = GroupReduceConfig {
                r_min: s.rank,
                r_max: s.rank,
                ..gr
            };
            let parts = groupreduce_fit(e, freqs, gr)?.embedding.partitions();
            group_funneling_fit(e, &parts, s.rank, act, &s.train)?.into()
        }
        Method::Pq => {
            cfg.insert("group_size".into(), json!(s.group_size));
            cfg.insert("n_clusters".into(), json!(s.n_clusters));
            pq_fit(e, s.group_size, s.n_clusters, s.train.seed)?.embedding.into()
        }
        Method::Tt => {
            cfg.insert("vocab_shape".into(), json!(s.vocab_shape));
            cfg.insert("dim_shape".into(), json!(s.dim_shape));
            cfg.insert("tt_rank".into(), json!(s.tt_rank));
            tt_fit(e, &s.vocab_shape, &s.dim_shape, s.tt_rank)?.embedding.into()
        }
    };
    Ok(Fitted { embedding, config: cfg })
}
