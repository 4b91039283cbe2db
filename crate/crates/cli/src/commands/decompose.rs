use std::io::Write;

use distemb::embio::{write_factorized, write_report_json};
use distemb::report::Report;
use distemb::{CompressedEmbedding, CompressionStats};
use serde_json::json;

use crate::args::DecomposeArgs;
use crate::error::{config, CliResult};
use crate::fit::{fit, planned_params, validate, FitOptions};
use crate::source::{self, Source};
use crate::table::{num, thousands};

pub fn run(a: &DecomposeArgs, out: &mut dyn Write) -> CliResult<()> {
    let src = match (&a.source.input, a.source.synthetic) {
        (Some(path), _) => source::from_file(path, a.fit.freqs.as_deref(), &mut |w| eprintln!("warning: {w}"))?,
        (None, Some(shape)) => source::synthetic(shape, a.source.data_seed),
        (None, None) => return Err(config("decompose needs --input or --synthetic")),
    };
    let Source { e, freqs, label, .. } = src;
    let (vocab, dim) = e.shape();
    let opts = FitOptions::resolve(&a.fit, vocab, dim);
    validate(a.method, &opts, vocab, dim)?;

    if a.accounting_only {
        let params = planned_params(a.method, &opts, vocab, dim)
            .ok_or_else(|| config("accounting without fitting needs --r-min equal to --r-max"))?;
        let stats = CompressionStats::new(params, vocab, dim);
        writeln!(
            out,
            "{} on {vocab}x{dim}: emb params {}, compression rate {}",
            a.method,
            thousands(params),
            stats.rate_label()
        )?;
        return Ok(());
    }

    let fitted = fit(a.method, &e, &freqs, &opts)?;
    let mut cfg = fitted.config;
    cfg.insert("source".into(), json!(label));
    let report = Report::evaluate(a.method.name(), &fitted.embedding, &e, None, opts.train.seed, cfg)?;
    if let Some(p) = &a.output {
        write_factorized(p, &fitted.embedding)?;
    }
    if let Some(p) = &a.json {
        write_report_json(p, std::slice::from_ref(&report))?;
    }
    let stats = fitted.embedding.stats();
    writeln!(
        out,
        "{} on {vocab}x{dim}: emb params {}, compression rate {}, recon loss {} (squared {})",
        a.method,
        thousands(stats.param_count),
        stats.rate_label(),
        num(report.recon_loss_l2),
        num(report.recon_loss_sq)
    )?;
    Ok(())
}
