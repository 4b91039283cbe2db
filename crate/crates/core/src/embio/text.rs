//! Whitespace-separated text embeddings: a `vocab dim` header, then one
//! `token v₁ … v_d` line per word.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Values are written with this many significant digits.
pub const TEXT_DIGITS: usize = 9;

pub fn read_embedding_text(path: impl AsRef<Path>) -> Result<(DenseMatrix, Vec<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_embedding_text(&text, path)
}

/// Parse file contents; `path` only labels error messages.
pub fn parse_embedding_text(text: &str, path: &Path) -> Result<(DenseMatrix, Vec<String>)> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [vocab, dim] = fields[..] else {
        return Err(err(1, format!("header must be \"<vocab> <dim>\", got {header:?}")));
    };
    let parse_count = |s: &str, what: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| err(1, format!("{what} {s:?} is not a positive integer")))
    };
    let vocab = parse_count(vocab, "vocabulary size")?;
    let dim = parse_count(dim, "dimension")?;

    let mut tokens = Vec::with_capacity(vocab);
    let mut seen = HashSet::with_capacity(vocab);
    let mut data = Vec::with_capacity(vocab * dim);
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == vocab {
            return Err(err(n, format!("more than {vocab} embedding lines")));
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line has a field");
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(err(n, format!("expected {dim} values, found {}", values.len())));
        }
        for v in values {
            let x: f64 = v.parse().map_err(|_| err(n, format!("{v:?} is not a number")))?;
            if !x.is_finite() {
                return Err(err(n, format!("non-finite value {v:?}")));
            }
            data.push(x);
        }
        if !seen.insert(token.to_string()) {
            return Err(err(n, format!("duplicate token {token:?}")));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != vocab {
        let last = text.lines().count();
        return Err(err(
            last,
            format!("header declares {vocab} words, file has {}", tokens.len()),
        ));
    }
    Ok((DenseMatrix::new(vocab, dim, data)?, tokens))
}

pub fn write_embedding_text(path: impl AsRef<Path>, m: &DenseMatrix, tokens: &[String]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(format_embedding_text(m, tokens)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn format_embedding_text(m: &DenseMatrix, tokens: &[String]) -> Result<String> {
    if tokens.len() != m.rows() {
        return Err(Error::arg(format!("{} tokens for {} rows", tokens.len(), m.rows())));
    }
    let mut seen = HashSet::new();
    for t in tokens {
        if t.is_empty() || t.chars().any(char::is_whitespace) {
            return Err(Error::arg(format!("token {t:?} is empty or contains whitespace")));
        }
        if !seen.insert(t) {
            return Err(Error::arg(format!("duplicate token {t:?}")));
        }
    }
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for (i, t) in tokens.iter().enumerate() {
        s.push_str(t);
        for x in m.row(i) {
            s.push(' ');
            s.push_str(&format!("{:.*e}", TEXT_DIGITS - 1, x));
        }
        s.push('\n');
    }
    Ok(s)
}

/// `w0, w1, …` placeholder tokens for matrices without a vocabulary.
pub fn default_tokens(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<(DenseMatrix, Vec<String>)> {
        parse_embedding_text(s, Path::new("t.txt"))
    }

    #[test]
    fn reads_small_file() {
        let (m, t) = parse("2 3\na 1 2 3\nb 4 5 6.5\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 6.5);
        assert_eq!(t, vec!["a", "b"]);
    }

    #[test]
    fn column_count_error_names_line() {
        let e = parse("2 3\na 1 2 3\nb 4 5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        // Line 2 of the body is file line 3; a bad first body line is line 2.
        let e = parse("2 3\na 1 2\nb 4 5 6\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn duplicates_and_counts_rejected() {
        assert!(matches!(parse("2 1\na 1\na 2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(parse("3 1\na 1\nb 2\n").is_err());
        assert!(parse("1 1\na 1\nb 2\n").is_err());
        assert!(parse("x 1\n").is_err());
        assert!(parse("1 1\na nan\n").is_err());
    }

    #[test]
    fn nine_significant_digits() {
        let m = DenseMatrix::from_rows(&[[std::f64::consts::PI, -1.0e-7]]).unwrap();
        let s = format_embedding_text(&m, &default_tokens(1)).unwrap();
        assert_eq!(s, "1 2\nw0 3.14159265e0 -1.00000000e-7\n");
    }
}
