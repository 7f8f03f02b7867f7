// SPDX-License-Identifier: Apache-2.0

//! Tab-separated per-node tables with `# key=value` header comments.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::centrality::Centralities;
use crate::oracle::Comparison;

/// Significant digits written for every float.
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Formats like C's `%.9g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let prec = SIGNIFICANT_DIGITS - 1;
    let sci = format!("{x:.prec$e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        let decimals = (prec as i32 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// A table of float columns indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Header comments, in order.
    pub comments: Vec<(String, String)>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(comments: Vec<(String, String)>) -> Self {
        Self {
            comments,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Centrality columns, followed by `std:<name>` columns when `std` is
    /// given.
    pub fn from_centralities(
        comments: Vec<(String, String)>,
        mean: &Centralities,
        std: Option<&Centralities>,
    ) -> Self {
        let mut table = Self::new(comments);
        for (name, col) in mean.columns() {
            table.push(name, col.to_vec());
        }
        if let Some(std) = std {
            for (name, col) in std.columns() {
                table.push(format!("std:{name}"), col.to_vec());
            }
        }
        table
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(column);
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }

    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_comments(&mut w, &self.comments)?;
        write!(w, "node")?;
        for name in &self.names {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for row in 0..self.num_rows() {
            write!(w, "{row}")?;
            for col in &self.columns {
                write!(w, "\t{}", format_float(col[row]))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TsvError> {
        let mut table = Self::new(Vec::new());
        let mut header_seen = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |message: String| TsvError::Parse {
                line: lineno,
                message,
            };
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim_start().split_once('=') {
                    table.comments.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let first = fields.next().unwrap_or_default();
            if !header_seen {
                if first != "node" {
                    return Err(err(format!(
                        "expected header starting with \"node\", got {first:?}"
                    )));
                }
                table.names = fields.map(str::to_string).collect();
                table.columns = vec![Vec::new(); table.names.len()];
                header_seen = true;
                continue;
            }
            let node: usize = first
                .parse()
                .map_err(|_| err(format!("bad node id {first:?}")))?;
            if node != table.num_rows() {
                return Err(err(format!(
                    "expected node {}, got {node}",
                    table.num_rows()
                )));
            }
            let values: Vec<&str> = fields.collect();
            if values.len() != table.names.len() {
                return Err(err(format!(
                    "expected {} values, got {}",
                    table.names.len(),
                    values.len()
                )));
            }
            for (col, v) in table.columns.iter_mut().zip(values) {
                col.push(parse_float(v).ok_or_else(|| err(format!("bad number {v:?}")))?);
            }
        }
        if !header_seen {
            return Err(TsvError::Parse {
                line: 0,
                message: "missing header".into(),
            });
        }
        Ok(table)
    }
}

fn write_comments<W: Write>(w: &mut W, comments: &[(String, String)]) -> io::Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Per-node report `node, exact, estimate, rel_error, abs_error` followed
/// by a `# summary.<stat>=<value>` block. `rel_error` is `NA` where the
/// exact value is 0.
pub fn write_comparison<W: Write>(
    mut w: W,
    comments: &[(String, String)],
    cmp: &Comparison,
) -> io::Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "node\texact\testimate\trel_error\tabs_error")?;
    for e in &cmp.nodes {
        let rel = e.rel_error.map_or_else(|| "NA".to_string(), format_float);
        writeln!(
            w,
            "{}\t{}\t{}\t{rel}\t{}",
            e.node,
            format_float(e.exact),
            format_float(e.estimate),
            format_float(e.abs_error)
        )?;
    }
    let s = &cmp.summary;
    writeln!(w, "# summary.count={}", s.count)?;
    for (k, v) in [
        ("q1", s.q1),
        ("median", s.median),
        ("q3", s.q3),
        ("mean", s.mean),
        ("std", s.std),
    ] {
        writeln!(w, "# summary.{k}={}", format_float(v))?;
    }
    writeln!(w, "# summary.zero_exact={}", s.zero_exact)?;
    writeln!(
        w,
        "# summary.max_abs_error_zero_exact={}",
        format_float(s.max_abs_error_zero_exact)
    )?;
    w.flush()
}
