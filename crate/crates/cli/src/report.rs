//! Report assembly: JSON-lines records for `--out`, a plain-text rendering
//! for the terminal.
//!
//! Every record is one JSON object on its own line with a `record` field
//! naming its kind. Records never contain timings, so a fixed invocation
//! always produces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::problem::{ChannelFile, ProblemFile};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub tol: f64,
    pub grid: usize,
    pub sweeps: usize,
    pub candidates: usize,
    pub restarts: usize,
    pub trials: usize,
    pub instances: usize,
    pub budget: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub record: &'static str,
    pub command: String,
    pub problem: String,
    pub origin: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CornerRecord {
    pub record: &'static str,
    pub index: usize,
    /// Coding order, 1-based source indices.
    pub order: Vec<usize>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub member: bool,
    pub worst_slack: f64,
    /// Active constraint subsets, each a list of 1-based sources.
    pub active: Vec<Vec<usize>>,
    pub chain: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRecord {
    pub record: &'static str,
    pub instance: usize,
    pub identity: &'static str,
    pub checks: usize,
    pub worst: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoncrossingRecord {
    pub record: &'static str,
    pub instance: usize,
    pub corners: usize,
    pub members: usize,
    pub chains: usize,
    pub min_slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionRecord {
    pub record: &'static str,
    pub draw: usize,
    pub z_sizes: Vec<usize>,
    pub direction: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphabetBoundRecord {
    pub record: &'static str,
    pub index: usize,
    pub direction: Vec<f64>,
    pub enlarged: f64,
    pub capped: f64,
    pub capped_oracle: Option<f64>,
    pub reduced: f64,
    pub grid: usize,
    pub capped_grid: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub record: &'static str,
    pub index: usize,
    pub direction: Vec<f64>,
    pub rates: Vec<f64>,
    pub distortions: Vec<f64>,
    pub objective: f64,
    pub z_sizes: Vec<usize>,
    pub sweeps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub record: &'static str,
    pub suite: String,
    pub detail: String,
    pub problem: ProblemFile,
    pub channels: ChannelFile,
}

/// Closing record; `details` holds the command-specific totals.
#[derive(Clone, Debug, Serialize)]
pub struct Summary<T: Serialize> {
    pub record: &'static str,
    pub command: String,
    pub passed: bool,
    pub items: usize,
    pub failures: usize,
    #[serde(flatten)]
    pub details: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremeSummary {
    pub distinct: usize,
    /// Smallest L∞ distance between two corners; absent for a single corner.
    pub min_gap: Option<f64>,
    pub sum_rate_spread: f64,
    pub joint_information: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstSummary {
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSummary {
    pub coordinates: Vec<String>,
    pub order: Vec<usize>,
}

/// Accumulates records and the human rendering of one command.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<String>,
    text: String,
    counterexamples: usize,
    omitted: usize,
}

/// Counterexample dumps beyond this many are counted but not written.
pub const MAX_COUNTEREXAMPLES: usize = 10;

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record<T: Serialize>(&mut self, rec: &T) {
        self.lines.push(serde_json::to_string(rec).expect("records serialize"));
    }

    pub fn counterexample(&mut self, rec: Counterexample) {
        if self.counterexamples < MAX_COUNTEREXAMPLES {
            self.counterexamples += 1;
            self.record(&rec);
        } else {
            self.omitted += 1;
        }
    }

    pub fn omitted_counterexamples(&self) -> usize {
        self.omitted
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    /// Left-aligned table with a dashed rule under the header.
    pub fn table(&mut self, header: &[&str], rows: &[Vec<String>]) {
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let render = |cells: &mut dyn Iterator<Item = &str>| {
            let mut s = String::new();
            for (c, w) in cells.zip(&widths) {
                let _ = write!(s, "{c:<w$}  ");
            }
            s.trim_end().to_string()
        };
        let head = render(&mut header.iter().copied());
        let rule = "-".repeat(head.len());
        self.line(head);
        self.line(rule);
        for row in rows {
            let r = render(&mut row.iter().map(String::as_str));
            self.line(r);
        }
    }

    pub fn records(&self) -> &[String] {
        &self.lines
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn write_records(&self, path: &Path) -> Result<()> {
        let mut body = self.lines.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|source| CliError::Io {
            path: PathBuf::from(path),
            source,
        })
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_single_lines_tagged_by_kind() {
        let mut r = Report::new();
        r.record(&WorstSummary { worst: 1.5 });
        r.record(&Summary {
            record: "summary",
            command: "x".into(),
            passed: true,
            items: 2,
            failures: 0,
            details: WorstSummary { worst: 0.25 },
        });
        assert_eq!(
            r.records()[1],
            r#"{"record":"summary","command":"x","passed":true,"items":2,"failures":0,"worst":0.25}"#
        );
    }

    #[test]
    fn non_finite_values_become_null() {
        let mut r = Report::new();
        r.record(&WorstSummary { worst: f64::INFINITY });
        assert_eq!(r.records()[0], r#"{"worst":null}"#);
    }

    #[test]
    fn tables_align() {
        let mut r = Report::new();
        r.table(&["a", "long"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(r.text(), "a    long\n---------\nxyz  1\n");
    }
}
