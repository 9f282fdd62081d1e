//! Traceability table: one row per acceptance criterion, read back from an
//! `accept` run directory and checked against the recorded checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use breather_core::acceptance::CRITERIA;
use breather_core::CriterionResult;
use serde::{Deserialize, Serialize};

use crate::artifacts::{checksum_mismatches, read_metadata};

pub const ACCEPTANCE_JSON: &str = "acceptance.json";
pub const ACCEPTANCE_CSV: &str = "acceptance.csv";
pub const TRACEABILITY_MD: &str = "traceability.md";
pub const ACCEPTANCE_COLUMNS: [&str; 4] = ["id", "measured", "tolerance", "verdict"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
    ChecksumMismatch,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
            Verdict::ChecksumMismatch => "CHECKSUM MISMATCH",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub id: u32,
    pub name: String,
    pub anchor: String,
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub rows: Vec<TraceRow>,
    pub mismatched_files: Vec<String>,
}

impl TraceReport {
    pub fn count(&self, v: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == v).count()
    }
}

pub fn acceptance_csv(results: &[CriterionResult]) -> String {
    let mut out = ACCEPTANCE_COLUMNS.join(",");
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{}",
            r.id,
            r.measured,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}

fn parse_rows(text: &str) -> BTreeMap<u32, (f64, Verdict)> {
    let mut rows = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != ACCEPTANCE_COLUMNS.len() {
            continue;
        }
        let (Ok(id), Ok(measured)) = (cols[0].parse::<u32>(), cols[1].parse::<f64>()) else {
            continue;
        };
        let verdict = match cols[3].trim() {
            "PASS" => Verdict::Pass,
            "FAIL" => Verdict::Fail,
            _ => continue,
        };
        rows.insert(id, (measured, verdict));
    }
    rows
}

pub fn traceability_report(dir: &Path) -> TraceReport {
    let mismatched_files = read_metadata(dir)
        .map(|m| checksum_mismatches(dir, &m))
        .unwrap_or_default();
    let tampered = mismatched_files.iter().any(|f| f == ACCEPTANCE_CSV);
    let parsed = std::fs::read_to_string(dir.join(ACCEPTANCE_CSV))
        .map(|t| parse_rows(&t))
        .unwrap_or_default();
    let rows = CRITERIA
        .iter()
        .enumerate()
        .map(|(k, (name, anchor, tol))| {
            let id = k as u32 + 1;
            let (measured, verdict) = match parsed.get(&id) {
                None => (None, Verdict::Skipped),
                Some(_) if tampered => (None, Verdict::ChecksumMismatch),
                Some((m, v)) => (Some(*m), *v),
            };
            TraceRow {
                id,
                name: name.to_string(),
                anchor: anchor.to_string(),
                measured,
                tolerance: *tol,
                verdict,
            }
        })
        .collect();
    TraceReport {
        rows,
        mismatched_files,
    }
}

pub fn render_markdown(report: &TraceReport) -> String {
    let mut out = String::from("| # | criterion | claim | measured | tolerance | verdict |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let measured = r.measured.map_or("-".to_string(), |m| format!("{m:.4e}"));
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.1e} | {} |",
            r.id,
            r.name,
            r.anchor.replace('|', "\\|"),
            measured,
            r.tolerance,
            r.verdict.label()
        );
    }
    if !report.mismatched_files.is_empty() {
        let _ = writeln!(
            out,
            "\nChecksum mismatch: {}",
            report.mismatched_files.join(", ")
        );
    }
    out
}
