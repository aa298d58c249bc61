//! Reader and writer for LIBSVM sparse text records `<label> <idx>:<val> ...`.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::Sample;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {reason}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    /// 1-based character column where the offending token starts.
    pub column: usize,
    pub reason: String,
}

/// Sparse record; feature indices are 1-based and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub label: f64,
    pub features: Vec<(u32, f64)>,
}

impl LabeledSample {
    /// Largest feature index present, 0 for an empty record.
    pub fn max_index(&self) -> u32 {
        self.features.last().map_or(0, |&(i, _)| i)
    }

    /// Binary label: `{0, -1} -> -1`, `{1, +1} -> +1`.
    pub fn binary_label(&self) -> Option<f64> {
        if self.label == 1.0 {
            Some(1.0)
        } else if self.label == 0.0 || self.label == -1.0 {
            Some(-1.0)
        } else {
            None
        }
    }

    /// Dense copy with `dim` features; indices beyond `dim` are dropped.
    pub fn to_dense(&self, dim: usize) -> Sample {
        let mut f = vec![0.0; dim];
        for &(i, v) in &self.features {
            if let Some(slot) = f.get_mut(i as usize - 1) {
                *slot = v;
            }
        }
        Sample::new(self.label, f)
    }
}

fn err(line: usize, column: usize, reason: impl Into<String>) -> ParseError {
    ParseError { line, column, reason: reason.into() }
}

fn parse_number(tok: &str, line: usize, column: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = tok.parse().map_err(|_| err(line, column, format!("non-numeric {what} {tok:?}")))?;
    if !v.is_finite() {
        return Err(err(line, column, format!("non-finite {what} {tok:?}")));
    }
    Ok(v)
}

fn parse_line(text: &str, line: usize) -> Result<Option<LabeledSample>, ParseError> {
    let body = text.split('#').next().unwrap_or("");
    let mut tokens = body
        .char_indices()
        .filter(|&(i, c)| !c.is_whitespace() && (i == 0 || body[..i].ends_with(char::is_whitespace)))
        .map(|(start, _)| {
            let len = body[start..].find(char::is_whitespace).unwrap_or(body.len() - start);
            (start + 1, &body[start..start + len])
        });
    let Some((col, label_tok)) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_number(label_tok, line, col, "label")?;
    let mut features: Vec<(u32, f64)> = Vec::new();
    for (col, tok) in tokens {
        let (idx_tok, val_tok) = tok.split_once(':').ok_or_else(|| err(line, col, format!("missing colon in {tok:?}")))?;
        let idx: u32 = idx_tok
            .parse()
            .map_err(|_| err(line, col, format!("non-numeric index {idx_tok:?}")))?;
        if idx == 0 {
            return Err(err(line, col, "feature indices are 1-based"));
        }
        if let Some(&(prev, _)) = features.last() {
            if idx <= prev {
                return Err(err(line, col, format!("non-increasing index {idx} after {prev}")));
            }
        }
        let val = parse_number(val_tok, line, col + idx_tok.len() + 1, "value")?;
        features.push((idx, val));
    }
    Ok(Some(LabeledSample { label, features }))
}

/// Parses a LIBSVM stream, preserving record order. Blank and comment-only
/// lines are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Vec<LabeledSample>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| err(line_no, 1, format!("unreadable line: {e}")))?;
        if let Some(rec) = parse_line(&text, line_no)? {
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn parse_libsvm_str(text: &str) -> Result<Vec<LabeledSample>, ParseError> {
    parse_libsvm(text.as_bytes())
}

/// Writes records in a form [`parse_libsvm`] reads back bit-identically.
pub fn serialize_libsvm(records: &[LabeledSample]) -> String {
    let mut s = String::new();
    for r in records {
        write!(s, "{}", r.label).unwrap();
        for (i, v) in &r.features {
            write!(s, " {i}:{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Dense, binary-labelled samples with features scaled by their max
/// absolute value over the whole set (all-zero columns stay zero).
pub fn to_normalized_binary(records: &[LabeledSample]) -> Result<Vec<Sample>, ParseError> {
    let dim = records.iter().map(LabeledSample::max_index).max().unwrap_or(0) as usize;
    let mut samples = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let label = r
            .binary_label()
            .ok_or_else(|| err(k + 1, 1, format!("label {} is not binary", r.label)))?;
        let mut s = r.to_dense(dim);
        s.label = label;
        samples.push(s);
    }
    max_abs_normalize(&mut samples);
    Ok(samples)
}

/// Rescales every feature column to `[-1, 1]` by its max absolute value.
pub fn max_abs_normalize(samples: &mut [Sample]) {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut scale = vec![0.0f64; dim];
    for s in samples.iter() {
        for (m, v) in scale.iter_mut().zip(&s.features) {
            *m = m.max(v.abs());
        }
    }
    for s in samples.iter_mut() {
        for (v, m) in s.features.iter_mut().zip(&scale) {
            if *m > 0.0 {
                *v /= m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_record() {
        let r = parse_libsvm_str("+1 1:0.5 3:-2").unwrap();
        assert_eq!(r, vec![LabeledSample { label: 1.0, features: vec![(1, 0.5), (3, -2.0)] }]);
    }

    #[test]
    fn empty_input() {
        assert!(parse_libsvm_str("").unwrap().is_empty());
    }

    #[test]
    fn comments_and_empty_features() {
        let r = parse_libsvm_str("# header\n-1\n0 2:1 # trailing\n").unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[0].features.is_empty());
        assert_eq!(r[1].binary_label(), Some(-1.0));
    }

    #[test]
    fn non_increasing_index() {
        let e = parse_libsvm_str("1 3:1 2:1").unwrap_err();
        assert_eq!((e.line, e.column), (1, 7));
        assert!(e.reason.contains("non-increasing"));
    }

    #[test]
    fn missing_colon_and_bad_number() {
        let e = parse_libsvm_str("1 1:1\n1 4").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(e.reason.contains("colon"));
        let e = parse_libsvm_str("x 1:1").unwrap_err();
        assert!(e.reason.contains("label"));
        let e = parse_libsvm_str("1 1:abc").unwrap_err();
        assert_eq!(e.column, 5);
    }

    #[test]
    fn normalization_maps_to_unit_range() {
        let r = parse_libsvm_str("1 1:4 2:-1\n0 1:-2 2:0.5\n").unwrap();
        let s = to_normalized_binary(&r).unwrap();
        assert_eq!(s[0].features, vec![1.0, -1.0]);
        assert_eq!(s[1].features, vec![-0.5, 0.5]);
        assert_eq!(s[1].label, -1.0);
    }
}
