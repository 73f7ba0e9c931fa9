//! CSV and JSON export of experiment reports.
//!
//! The CSV has one row per evaluated cell, including budget-generalization
//! rows (cell `gen:<agent>`). Columns, in order, are [`CSV_COLUMNS`]; the
//! per-metric groups repeat for `task_return`, `safety_total` and
//! `max_step_z_deficit`. Numbers use 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plan::ExperimentReport;
use super::stats::{EvalStats, MetricSummary};
use crate::error::{Error, Result};

const METRICS: [&str; 3] = ["task_return", "safety_total", "max_step_z_deficit"];
const METRIC_FIELDS: [&str; 8] = ["mean", "median", "q1", "q3", "whisker_low", "whisker_high", "min", "max"];

pub const CSV_COLUMNS: [&str; 9] = [
    "cell",
    "agent",
    "budget_d",
    "reshape_n",
    "episodes",
    "violation_fraction",
    "max_safety_total",
    "cost_rate",
    "metrics",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Full header line, with the metric groups expanded.
pub fn csv_header() -> String {
    let mut cols: Vec<String> = CSV_COLUMNS[..8].iter().map(|c| c.to_string()).collect();
    for m in METRICS {
        for f in METRIC_FIELDS {
            cols.push(format!("{m}_{f}"));
        }
        cols.push(format!("{m}_outliers"));
    }
    cols.join(",")
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn metric_cells(m: &MetricSummary) -> Vec<String> {
    let mut v: Vec<String> =
        [m.mean, m.median, m.q1, m.q3, m.whisker_low, m.whisker_high, m.min, m.max].iter().map(|&x| num(x)).collect();
    v.push(m.outliers.len().to_string());
    v
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn row(cell: &str, agent: &str, reshape_n: Option<f64>, s: &EvalStats) -> String {
    let mut cols = vec![
        quote(cell),
        quote(agent),
        num(s.budget_d),
        reshape_n.map(num).unwrap_or_default(),
        s.episodes.to_string(),
        num(s.violation_fraction),
        num(s.max_safety_total),
        num(s.cost_rate),
    ];
    cols.extend(metric_cells(&s.task_return));
    cols.extend(metric_cells(&s.safety_total));
    cols.extend(metric_cells(&s.max_step_z_deficit));
    cols.join(",")
}

pub fn to_csv(report: &ExperimentReport) -> String {
    let mut out = csv_header();
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(out, "{}", row(&c.cell, &c.agent, Some(c.reshape_n), &c.stats));
    }
    if let Some(g) = &report.generalization {
        for r in &g.rows {
            let _ = writeln!(out, "{}", row(&format!("gen:{}", r.agent), "q_learning", None, &r.stats));
        }
    }
    out
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn from_json(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn export_results(report: &ExperimentReport, format: ExportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => to_csv(report),
        ExportFormat::Json => to_json(report)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
