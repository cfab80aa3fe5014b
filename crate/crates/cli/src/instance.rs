//! Instance files: a TSV log-probability matrix (T rows, V+1 columns, blank
//! first) with the label sequence on a `#labels:` comment line.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use latgraph::{DenseFsa, Label, Validation};
use ndarray::Array2;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub logprobs: Array2<f64>,
    pub labels: Option<Vec<Label>>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<InstanceFile> {
        let mut labels = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix("#labels:") {
                let parsed = rest
                    .split_whitespace()
                    .map(|s| s.parse::<Label>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .with_context(|| format!("line {line_no}: bad label list"))?;
                labels = Some(parsed);
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let row = trimmed
                .split('\t')
                .map(|s| parse_float(s.trim()))
                .collect::<Option<Vec<f64>>>()
                .with_context(|| format!("line {line_no}: bad number"))?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    bail!("line {line_no}: {} columns, expected {}", row.len(), first.len());
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("no matrix rows");
        }
        let cols = rows[0].len();
        let logprobs = Array2::from_shape_vec((rows.len(), cols), rows.concat())?;
        let vocab = cols as Label - 1;
        if let Some(labels) = &labels {
            if let Some(&bad) = labels.iter().find(|&&k| k < 1 || k > vocab) {
                bail!("label {bad} outside 1..={vocab}");
            }
        }
        Ok(InstanceFile { logprobs, labels })
    }

    pub fn read(path: &Path) -> Result<InstanceFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        InstanceFile::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn labels(&self) -> Result<&[Label]> {
        match &self.labels {
            Some(l) if !l.is_empty() => Ok(l),
            _ => bail!("instance has no #labels: line"),
        }
    }

    /// The dense acceptor, with row-normalization checks if requested.
    pub fn dense(&self, validation: Validation) -> Result<DenseFsa> {
        Ok(DenseFsa::validated(self.logprobs.clone(), validation)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(labels) = &self.labels {
            let list: Vec<String> = labels.iter().map(|k| k.to_string()).collect();
            writeln!(out, "#labels: {}", list.join(" ")).expect("write to String");
        }
        out.push_str(&matrix_tsv(&self.logprobs));
        out
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "-inf" | "-Inf" | "-INF" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Tab-separated rows, shortest round-trip formatting.
pub fn matrix_tsv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let inst = InstanceFile {
            logprobs: array![[0.3f64.ln(), 0.7f64.ln()], [f64::NEG_INFINITY, 0.0]],
            labels: Some(vec![1]),
        };
        let text = inst.to_text();
        assert!(text.starts_with("#labels: 1\n"));
        assert_eq!(InstanceFile::parse(&text).unwrap(), inst);
    }

    #[test]
    fn rejects_ragged_rows_and_bad_labels() {
        assert!(InstanceFile::parse("#labels: 1\n0\t0\n0\n").is_err());
        assert!(InstanceFile::parse("#labels: 2\n0\t0\n").is_err());
        assert!(InstanceFile::parse("#labels: 1\n").is_err());
        assert!(InstanceFile::parse("#labels: x\n0\t0\n").is_err());
        assert!(InstanceFile::parse("0\tabc\n").is_err());
    }

    #[test]
    fn labels_are_optional_until_needed() {
        let inst = InstanceFile::parse("# comment\n-0.1\t-2.3\n").unwrap();
        assert!(inst.labels.is_none());
        assert!(inst.labels().is_err());
    }
}
