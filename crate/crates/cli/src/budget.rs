//! Choosing each method's knobs so its parameter count lands near a target.

use distemb::factorizations::{pq_param_count, tt_param_count, tt_ranks};
use distemb::Method;

use crate::fit::{planned_params, FitOptions};

/// Largest accepted relative gap between a method's count and the budget.
pub const BUDGET_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Matched { opts: FitOptions, params: u64 },
    Skipped(String),
}

fn gap(p: u64, budget: u64) -> u64 {
    p.abs_diff(budget)
}

fn nearest_rank(budget: u64, per_rank: usize, max: usize) -> usize {
    ((budget as f64 / per_rank as f64).round() as usize).clamp(1, max.max(1))
}

/// Knobs for `method` whose count is closest to `budget`, or why none is
/// within [`BUDGET_TOLERANCE`].
pub fn plan(method: Method, vocab: usize, dim: usize, budget: u64, base: &FitOptions) -> Plan {
    let mut opts = base.clone();
    match method {
        Method::Svd | Method::Funneling => {
            opts.rank = nearest_rank(budget, vocab + dim, dim.min(vocab));
        }
        Method::GroupReduce | Method::GroupFunneling => {
            let c = opts.clusters.clamp(1, vocab);
            opts.clusters = c;
            let r = nearest_rank(budget, vocab + c * dim, dim);
            opts.rank = r;
            opts.r_min = r;
            opts.r_max = r;
        }
        Method::Pq => {
            let mut best: Option<(u64, usize, usize)> = None;
            for g in (1..=dim).filter(|g| dim.is_multiple_of(*g)) {
                let index_cost = (vocab * (dim / g)) as f64;
                let k = (((budget as f64 - index_cost) / dim as f64).round().max(1.0) as usize).min(vocab);
                let p = pq_param_count(vocab, dim, g, k);
                if best.is_none_or(|(bp, _, _)| gap(p, budget) < gap(bp, budget)) {
                    best = Some((p, g, k));
                }
            }
            let (_, g, k) = best.expect("dim has at least one divisor");
            opts.group_size = g;
            opts.n_clusters = k;
        }
        Method::Tt => {
            let feasible = tt_ranks(&opts.vocab_shape, &opts.dim_shape, usize::MAX);
            let max_rank = feasible.iter().copied().max().unwrap_or(1);
            opts.tt_rank = (1..=max_rank)
                .min_by_key(|&rho| gap(tt_param_count(&opts.vocab_shape, &opts.dim_shape, rho), budget))
                .unwrap_or(1);
        }
    }
    let Some(params) = planned_params(method, &opts, vocab, dim) else {
        return Plan::Skipped("parameter count depends on the fit".into());
    };
    let off = gap(params, budget) as f64 / budget.max(1) as f64;
    if off > BUDGET_TOLERANCE {
        return Plan::Skipped(format!(
            "closest configuration has {params} params, {:.1}% from the budget",
            100.0 * off
        ));
    }
    Plan::Matched { opts, params }
}
