//! Browser bindings for the compression demo.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` rather than exceptions, so the same functions run
//! unchanged in native tests.

use distemb::factorizations::{init_from_svd, pq_param_count, tt_param_count, Activation, CompressionStats};
use distemb::linalg::gaussian_matrix;
use distemb::losses::recon_loss;
use distemb::trainer::{fit_reconstruction, TrainConfig};
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest teacher the page will train on; keeps each call interactive.
pub const MAX_TRAIN_CELLS: usize = 64 * 1024;
pub const MAX_STEPS: usize = 5000;

type Outcome = Result<Value, String>;

fn finish(r: Outcome) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn check_trainable(vocab: usize, dim: usize, steps: usize) -> Result<(), String> {
    if vocab == 0 || dim == 0 {
        return Err("vocabulary and dimension must be positive".into());
    }
    if vocab * dim > MAX_TRAIN_CELLS {
        return Err(format!(
            "teacher {vocab}x{dim} too large for the demo (at most {MAX_TRAIN_CELLS} entries)"
        ));
    }
    if steps > MAX_STEPS {
        return Err(format!("at most {MAX_STEPS} training steps"));
    }
    Ok(())
}

fn stats_json(s: CompressionStats) -> Value {
    json!({
        "params": s.param_count,
        "full_params": s.full_param_count,
        "rate": s.compression_rate,
        "rate_label": s.rate_label(),
    })
}

/// Reconstruction error of truncated SVD and of a trained ReLU funnel for
/// every rank `1..=max_rank`, on a Gaussian teacher.
#[wasm_bindgen]
pub fn rank_sweep(vocab: usize, dim: usize, max_rank: usize, steps: usize, seed: u32) -> String {
    finish((|| {
        check_trainable(vocab, dim, steps)?;
        if max_rank == 0 || max_rank > dim {
            return Err(format!("max rank must be in 1..={dim}"));
        }
        let e = gaussian_matrix(vocab, dim, seed.into(), 1.0);
        let cfg = TrainConfig {
            steps,
            seed: seed.into(),
            ..TrainConfig::default()
        };
        let mut rows = Vec::new();
        for r in 1..=max_rank {
            let svd = init_from_svd(&e, r, Activation::Identity).map_err(|e| e.to_string())?;
            let svd_loss = recon_loss(&svd, &e).map_err(|e| e.to_string())?;
            let fit = fit_reconstruction(&e, r, Activation::Relu, &cfg).map_err(|e| e.to_string())?;
            let s = CompressionStats::low_rank(vocab, dim, r);
            rows.push(json!({
                "rank": r,
                "params": s.param_count,
                "rate_label": s.rate_label(),
                "svd": svd_loss,
                "funneling": fit.final_loss,
            }));
        }
        Ok(json!({ "vocab": vocab, "dim": dim, "rows": rows }))
    })())
}

fn usize_opt(o: &Map<String, Value>, key: &str) -> Result<usize, String> {
    o.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .filter(|&x| x > 0)
        .ok_or_else(|| format!("option {key:?} must be a positive integer"))
}

fn shape_opt(o: &Map<String, Value>, key: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("option {key:?} must be a list of positive integers");
    let list = o.get(key).and_then(Value::as_array).ok_or_else(bad)?;
    list.iter()
        .map(|v| v.as_u64().filter(|&x| x > 0).map(|x| x as usize).ok_or_else(bad))
        .collect()
}

/// Parameter count and compression rate for one configuration.
///
/// `options` is a JSON object: `{"rank"}` for svd and funneling,
/// `{"rank", "clusters"}` for groupreduce, `{"group_size", "n_clusters"}`
/// for pq, `{"vocab_shape", "dim_shape", "tt_rank"}` for tt.
#[wasm_bindgen]
pub fn compression(method: &str, vocab: usize, dim: usize, options: &str) -> String {
    finish((|| {
        if vocab == 0 || dim == 0 {
            return Err("vocabulary and dimension must be positive".into());
        }
        let o: Map<String, Value> = serde_json::from_str(options).map_err(|e| format!("options: {e}"))?;
        let params = match method {
            "svd" | "funneling" => {
                let r = usize_opt(&o, "rank")?;
                if r > dim {
                    return Err(format!("rank {r} exceeds dimension {dim}"));
                }
                (r * (vocab + dim)) as u64
            }
            "groupreduce" => {
                let (r, c) = (usize_opt(&o, "rank")?, usize_opt(&o, "clusters")?);
                if c > vocab || r > dim {
                    return Err("clusters must not exceed vocabulary, rank must not exceed dimension".into());
                }
                (r * (vocab + c * dim)) as u64
            }
            "pq" => {
                let (g, k) = (usize_opt(&o, "group_size")?, usize_opt(&o, "n_clusters")?);
                if !dim.is_multiple_of(g) {
                    return Err(format!("group size {g} does not divide dimension {dim}"));
                }
                pq_param_count(vocab, dim, g, k)
            }
            "tt" => {
                let (vs, ds) = (shape_opt(&o, "vocab_shape")?, shape_opt(&o, "dim_shape")?);
                if vs.len() != ds.len() {
                    return Err("vocab_shape and dim_shape need the same length".into());
                }
                if vs.iter().product::<usize>() < vocab || ds.iter().product::<usize>() != dim {
                    return Err(
                        "vocab_shape must cover the vocabulary and dim_shape must multiply to the dimension".into(),
                    );
                }
                tt_param_count(&vs, &ds, usize_opt(&o, "tt_rank")?)
            }
            other => return Err(format!("unknown method {other:?}")),
        };
        let mut out = json!({ "method": method, "vocab": vocab, "dim": dim });
        out.as_object_mut().unwrap().extend(
            stats_json(CompressionStats::new(params, vocab, dim))
                .as_object()
                .unwrap()
                .clone(),
        );
        Ok(out)
    })())
}

/// Training curve of the reconstruction step for one rank and activation,
/// alongside the truncated-SVD error it starts from.
#[wasm_bindgen]
pub fn step2_curve(vocab: usize, dim: usize, rank: usize, activation: &str, steps: usize, seed: u32) -> String {
    finish((|| {
        check_trainable(vocab, dim, steps)?;
        if rank == 0 || rank > dim {
            return Err(format!("rank must be in 1..={dim}"));
        }
        let act: Activation = activation.parse().map_err(|e: distemb::Error| e.to_string())?;
        let e = gaussian_matrix(vocab, dim, seed.into(), 1.0);
        let svd = init_from_svd(&e, rank, Activation::Identity).map_err(|e| e.to_string())?;
        let svd_loss = recon_loss(&svd, &e).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            steps,
            seed: seed.into(),
            ..TrainConfig::default()
        };
        let fit = fit_reconstruction(&e, rank, act, &cfg).map_err(|e| e.to_string())?;
        Ok(json!({
            "activation": act.name(),
            "svd": svd_loss,
            "initial": fit.initial_loss,
            "final": fit.final_loss,
            "curve": fit.curve.iter().map(|&(s, l)| json!([s, l])).collect::<Vec<_>>(),
        }))
    })())
}
