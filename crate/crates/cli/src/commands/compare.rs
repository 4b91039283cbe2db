use std::io::Write;

use distemb::embio::write_report_json;
use distemb::report::Report;
use distemb::{CompressedEmbedding, CompressionStats};
use serde_json::json;

use crate::args::CompareArgs;
use crate::budget::{plan, Plan};
use crate::error::{config, CliResult};
use crate::fit::{fit, FitOptions};
use crate::source;
use crate::table::{num, opt_num, render, thousands};

pub fn run(a: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut methods = Vec::new();
    for m in &a.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    if methods.len() < 2 {
        return Err(config("compare needs at least two distinct methods"));
    }
    let src = match (&a.input, a.synthetic) {
        (Some(p), _) => source::from_file(p, a.fit.freqs.as_deref(), &mut |w| eprintln!("warning: {w}"))?,
        (None, Some(shape)) => source::synthetic(shape, a.data_seed),
        (None, None) if a.accounting_only => {
            return Err(config("--accounting-only needs --input or --synthetic"));
        }
        (None, None) => {
            let t = a.fit.train.config();
            t.validate().map_err(|e| config(e.to_string()))?;
            source::pretrained(&a.gen, a.dim, &t, 0.2)?
        }
    };
    let (vocab, dim) = src.e.shape();
    let base = FitOptions::resolve(&a.fit, vocab, dim);
    let budget = a.budget.unwrap_or((base.rank * (vocab + dim)) as u64);
    if budget == 0 {
        return Err(config("--budget must be positive"));
    }
    writeln!(
        out,
        "budget {} params on {vocab}x{dim} ({}), tolerance 3%",
        thousands(budget),
        src.label
    )?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for m in methods {
        let opts = match plan(m, vocab, dim, budget, &base) {
            Plan::Matched { opts, .. } => opts,
            Plan::Skipped(why) => {
                rows.push(vec![
                    m.name().into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    format!("skipped: {why}"),
                ]);
                continue;
            }
        };
        if a.accounting_only {
            let p = crate::fit::planned_params(m, &opts, vocab, dim).expect("matched plans are countable");
            let stats = CompressionStats::new(p, vocab, dim);
            rows.push(vec![
                m.name().into(),
                thousands(p),
                stats.rate_label(),
                "-".into(),
                "-".into(),
                String::new(),
            ]);
            continue;
        }
        let fitted = fit(m, &src.e, &src.freqs, &opts)?;
        let mut cfg = fitted.config;
        cfg.insert("budget".into(), json!(budget));
        let h = src.heldout.as_ref().map(|(w, ex)| (w, &ex[..]));
        let r = Report::evaluate(m.name(), &fitted.embedding, &src.e, h, opts.train.seed, cfg)?;
        let off = 100.0 * (fitted.embedding.param_count() as f64 / budget as f64 - 1.0);
        rows.push(vec![
            r.method.clone(),
            thousands(r.emb_params),
            r.rate_label(),
            num(r.recon_loss_l2),
            opt_num(r.heldout_ce),
            format!("{off:+.2}% of budget"),
        ]);
        reports.push(r);
    }
    let headers = ["method", "emb params", "rate", "recon l2", "heldout ce", "<note"];
    write!(out, "{}", render(&headers, &rows))?;
    if let Some(p) = &a.json {
        write_report_json(p, &reports)?;
    }
    Ok(())
}
