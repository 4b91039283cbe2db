use std::io::Write;

use distemb::gradcheck::{run_standard, GRADCHECK_TOL};
use distemb::losses::FdOptions;
use serde_json::json;

use crate::args::GradcheckArgs;
use crate::error::{config, CliError, CliResult};
use crate::table::render;

pub fn run(a: &GradcheckArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(a.eps > 0.0 && a.eps.is_finite()) || a.max_coords == 0 {
        return Err(config("--eps must be positive and --max-coords at least 1"));
    }
    let opts = FdOptions {
        eps: a.eps,
        max_coords: a.max_coords,
        seed: a.seed,
        ..FdOptions::default()
    };
    let cases = run_standard(&opts, a.flip_sign)?;
    writeln!(out, "eps {:e}, tolerance {:e}", a.eps, GRADCHECK_TOL)?;
    let rows: Vec<Vec<String>> = cases
        .iter()
        .map(|c| {
            let w = c.worst();
            vec![
                format!("{}x{} r{}", c.case.vocab, c.case.dim, c.case.rank),
                c.case.activation.name().into(),
                c.case.alpha.to_string(),
                w.tensor.name().into(),
                format!("{:.3e}", w.fd.max_rel_error),
                w.fd.worst_coord.map_or("-".into(), |i| i.to_string()),
                if c.passed() { "ok" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    let headers = ["case", "<activation", "alpha", "worst", "rel error", "coord", "<status"];
    write!(out, "{}", render(&headers, &rows))?;
    if let Some(p) = &a.json {
        let v = json!({ "eps": a.eps, "tolerance": GRADCHECK_TOL, "cases": cases });
        std::fs::write(p, serde_json::to_string_pretty(&v)? + "\n")?;
    }

    let failed: Vec<_> = cases.iter().filter(|c| !c.passed()).collect();
    if failed.is_empty() {
        writeln!(out, "all {} cases within tolerance", cases.len())?;
        return Ok(());
    }
    let mut tensors: Vec<&str> = failed.iter().map(|c| c.worst().tensor.name()).collect();
    tensors.sort_unstable();
    tensors.dedup();
    let worst = failed.iter().map(|c| c.max_rel_error()).fold(0.0, f64::max);
    Err(CliError::CheckFailed(format!(
        "gradient check failed for {} in {} of {} cases (worst relative error {worst:.3e})",
        tensors.join(", "),
        failed.len(),
        cases.len()
    )))
}
