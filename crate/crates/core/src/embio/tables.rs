//! Frequency tables, JSON reports, corpora and loss curves.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::report::Report;
use crate::trainer::Corpus;

/// Word counts aligned to an embedding's token order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub counts: Vec<u64>,
    /// One message per defaulted or ignored token.
    pub warnings: Vec<String>,
}

/// Read `token<TAB>count` lines and align them to `tokens`. Tokens absent
/// from the file get count 1 and a warning.
pub fn read_frequencies(path: impl AsRef<Path>, tokens: &[String]) -> Result<FrequencyTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut file_counts: HashMap<&str, u64> = HashMap::new();
    let mut order = Vec::new();
    for (n, line) in text.lines().enumerate().map(|(n, l)| (n + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(tok), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(n, "expected \"token<TAB>count\"".into()));
        };
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| err(n, format!("count {count:?} is not a non-negative integer")))?;
        if file_counts.insert(tok, count).is_some() {
            return Err(err(n, format!("duplicate token {tok:?}")));
        }
        order.push(tok);
    }
    let mut warnings = Vec::new();
    let counts = tokens
        .iter()
        .map(|t| {
            file_counts.get(t.as_str()).copied().unwrap_or_else(|| {
                warnings.push(format!("token {t:?} missing from frequency table, using 1"));
                1
            })
        })
        .collect();
    let known: std::collections::HashSet<&str> = tokens.iter().map(String::as_str).collect();
    for t in order.into_iter().filter(|t| !known.contains(t)) {
        warnings.push(format!("token {t:?} is not in the embedding, ignored"));
    }
    Ok(FrequencyTable { counts, warnings })
}

pub fn write_frequencies(path: impl AsRef<Path>, tokens: &[String], counts: &[u64]) -> Result<()> {
    if tokens.len() != counts.len() {
        return Err(Error::arg(format!(
            "{} tokens but {} counts",
            tokens.len(),
            counts.len()
        )));
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (t, c) in tokens.iter().zip(counts) {
        writeln!(out, "{t}\t{c}")?;
    }
    out.flush()?;
    Ok(())
}

/// Round to 6 significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig6(n.as_f64().expect("f64 number"));
            if let Some(num) = Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Reports as a JSON array, reals rounded to 6 significant digits.
pub fn reports_to_json(reports: &[Report]) -> Result<Value> {
    let mut v = serde_json::to_value(reports)?;
    round_value(&mut v);
    Ok(v)
}

pub fn write_report_json(path: impl AsRef<Path>, reports: &[Report]) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&reports_to_json(reports)?)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<Vec<Report>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    fs::write(path, serde_json::to_string(corpus)?)?;
    Ok(())
}

/// Read and validate a corpus written by [`write_corpus`].
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let c: Corpus = serde_json::from_str(&fs::read_to_string(path)?)?;
    Corpus::new(c.vocab_size, c.context_size, c.examples).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub const CURVE_HEADER: &str = "step,recon,ce,total";

pub fn format_curve_csv(curve: &[(usize, LossBreakdown)]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for (step, l) in curve {
        s.push_str(&format!("{step},{},{},{}\n", l.recon, l.ce, l.total));
    }
    s
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[(usize, LossBreakdown)]) -> Result<()> {
    fs::write(path, format_curve_csv(curve))?;
    Ok(())
}

/// Parse a CSV produced by [`format_curve_csv`]; `alpha` is not stored and
/// is taken from the caller.
pub fn parse_curve_csv(text: &str, alpha: f64) -> Result<Vec<(usize, LossBreakdown)>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::InvalidInput(format!("curve must start with {CURVE_HEADER:?}")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::InvalidInput(format!("bad curve row {l:?}"));
            if f.len() != 4 {
                return Err(bad());
            }
            let step = f[0].parse().map_err(|_| bad())?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok((
                step,
                LossBreakdown {
                    recon: num(f[1])?,
                    ce: num(f[2])?,
                    total: num(f[3])?,
                    alpha,
                },
            ))
        })
        .collect()
}

/// Build a JSON object from key/value pairs in order.
pub fn object<I, K>(pairs: I) -> Map<String, Value>
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}
