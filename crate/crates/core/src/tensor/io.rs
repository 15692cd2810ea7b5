//! Plain-text matrix format: a `rows cols` header line followed by `rows`
//! lines of `cols` space-separated decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use super::DenseMatrix;
use crate::error::{Error, Result};

impl DenseMatrix {
    /// Serializes with 17 significant digits, enough to round-trip any `f64`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows(), self.cols());
        for r in 0..self.rows() {
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| parse_token(t, hline + 1))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse {
                line: hline + 1,
                msg: format!("expected `rows cols`, got {header:?}"),
            });
        };
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen_rows = 0;
        for (idx, line) in lines {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| parse_token(t, idx + 1))
                .collect::<Result<_>>()?;
            if values.len() != cols {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {cols} values, got {}", values.len()),
                });
            }
            data.extend(values);
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(Error::Parse {
                line: hline + 1,
                msg: format!("header declares {rows} rows, found {seen_rows}"),
            });
        }
        DenseMatrix::new(rows, cols, data)
    }
}

fn parse_token<T: FromStr>(token: &str, line: usize) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {token:?}"),
    })
}

/// Parses one non-negative integer label per line; blank lines are skipped.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_token(l.trim(), i + 1))
        .collect()
}

pub fn labels_to_text(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}
