//! Aligned plain-text tables and number formatting for stdout.

use distemb::embio::round_sig6;

/// Columns two spaces apart. The first column, and any header written with a
/// leading `<`, are left-aligned; the rest are right-aligned.
pub fn render(headers: &[&str], rows: &[Vec<String>]) -> String {
    let left: Vec<bool> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| i == 0 || h.starts_with('<'))
        .collect();
    let headers: Vec<&str> = headers.iter().map(|h| h.trim_start_matches('<')).collect();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&width).enumerate() {
            let sep = if i == 0 { "" } else { "  " };
            if left[i] {
                s.push_str(&format!("{sep}{cell:<w$}"));
            } else {
                s.push_str(&format!("{sep}{cell:>w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.clone());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Six significant digits, matching the JSON reports.
pub fn num(x: f64) -> String {
    format!("{}", round_sig6(x))
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), num)
}

/// `2080768 → "2,080,768"`
pub fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
