//! Two-column CSV dialect shared by every trace type.
//!
//! ```text
//! # key: value          (zero or more metadata lines)
//! x_header,y_header     (exactly one header row)
//! 1.5,0.25              (data rows, '.' decimal, LF endings)
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub(crate) struct TwoColumn {
    pub meta: Vec<(String, String)>,
    pub header: (String, String),
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub(crate) fn write(meta: &[(String, String)], header: (&str, &str), x: &[f64], y: &[f64]) -> String {
    let mut out = String::with_capacity(32 * (x.len() + meta.len() + 1));
    for (k, v) in meta {
        // Metadata values are single-line by construction.
        let _ = writeln!(out, "# {}: {}", k, v.replace('\n', " "));
    }
    let _ = writeln!(out, "{},{}", header.0, header.1);
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(out, "{a:?},{b:?}");
    }
    out
}

pub(crate) fn parse(text: &str) -> Result<TwoColumn> {
    let mut meta = Vec::new();
    let mut header = None;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.trim_start().strip_prefix('#') {
            if header.is_some() {
                return Err(Error::Parse(format!("line {lineno}: metadata after header row")));
            }
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (k, v) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("line {lineno}: metadata line needs `key: value`")))?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        let mut fields = line.split(',');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a.trim(), b.trim()),
            _ => return Err(Error::Parse(format!("line {lineno}: expected exactly two comma-separated fields"))),
        };
        if header.is_none() {
            header = Some((a.to_string(), b.to_string()));
            continue;
        }
        let pa = parse_f64(a).ok_or_else(|| Error::Parse(format!("line {lineno}: `{a}` is not a number")))?;
        let pb = parse_f64(b).ok_or_else(|| Error::Parse(format!("line {lineno}: `{b}` is not a number")))?;
        x.push(pa);
        y.push(pb);
    }
    let header = header.ok_or_else(|| Error::Parse("no header row (empty input?)".into()))?;
    if x.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(TwoColumn { meta, header, x, y })
}

fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Checks that `grid` is strictly increasing and finite and `values` finite with equal length.
pub(crate) fn check_samples(grid: &[f64], values: &[f64]) -> Result<()> {
    if grid.len() != values.len() {
        return Err(Error::InvalidGrid(format!(
            "grid has {} points but values has {}",
            grid.len(),
            values.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if let Some(i) = grid.iter().position(|g| !g.is_finite()) {
        return Err(Error::InvalidGrid(format!("grid point {i} is not finite")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("value {i} is not finite")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("grid not strictly increasing at index {}", i + 1)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let t = parse("# a: b\nx,y\n1,2\n3,4\n").unwrap();
        assert_eq!(t.meta, vec![("a".to_string(), "b".to_string())]);
        assert_eq!(t.header, ("x".to_string(), "y".to_string()));
        assert_eq!(t.x, vec![1.0, 3.0]);
        assert_eq!(t.y, vec![2.0, 4.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse("").is_err());
        assert!(parse("x,y\n").is_err());
        assert!(parse("x,y\n1,2,3\n").is_err());
        assert!(parse("x,y\n1,nan\n").is_err());
        assert!(parse("x,y\n1,abc\n").is_err());
        assert!(parse("x,y\n1,2\n# late: meta\n").is_err());
        assert!(parse("# no colon\nx,y\n1,2\n").is_err());
    }
}
