use std::io::Write;

use distemb::embio::{read_corpus, read_embedding_text, read_factorized, write_report_json};
use distemb::report::Report;
use serde_json::json;

use crate::args::EvalArgs;
use crate::error::{at, CliResult};
use crate::table::{num, opt_num, render, thousands};

pub fn run(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let (teacher, _) = read_embedding_text(&a.input).map_err(at(&a.input))?;
    let heldout = match (&a.corpus, &a.mixing) {
        (Some(c), Some(m)) => Some((
            read_embedding_text(m).map_err(at(m))?.0,
            read_corpus(c).map_err(at(c))?.examples,
        )),
        _ => None,
    };
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for path in &a.container {
        let emb = read_factorized(path).map_err(at(path))?;
        let cfg = [("container".to_string(), json!(path.display().to_string()))]
            .into_iter()
            .collect();
        let h = heldout.as_ref().map(|(w, ex)| (w, &ex[..]));
        let r = Report::evaluate(emb.method().name(), &emb, &teacher, h, 0, cfg)?;
        rows.push(vec![
            path.display().to_string(),
            r.method.clone(),
            thousands(r.emb_params),
            r.rate_label(),
            num(r.recon_loss_l2),
            num(r.recon_loss_sq),
            opt_num(r.heldout_ce),
        ]);
        reports.push(r);
    }
    let headers = [
        "container",
        "<method",
        "emb params",
        "rate",
        "recon l2",
        "recon sq",
        "heldout ce",
    ];
    write!(out, "{}", render(&headers, &rows))?;
    if let Some(p) = &a.json {
        write_report_json(p, &reports)?;
    }
    Ok(())
}
