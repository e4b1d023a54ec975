//! Run reports as JSON, CSV or an aligned text table.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunMetrics;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "txt" => Ok(ReportFormat::Table),
            _ => Err(Error::Config(format!("unknown report format '{s}'"))),
        }
    }
}

impl ReportFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

/// Field-wise arithmetic mean of several runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub run: String,
    pub planner: String,
    pub n_agents: f64,
    pub plan_failures: f64,
    pub agent_conflicts: f64,
    pub section_conflicts: f64,
    pub delayed: f64,
    pub replanned: f64,
    pub delayed_and_replanned: f64,
    pub unchanged: f64,
    pub path_offset_attempts: f64,
    pub replan_attempts: f64,
    pub pf_time: f64,
    pub cr_time: f64,
    pub pf_cost: f64,
    pub cr_cost: f64,
    pub cost_overhead: f64,
    pub post_section_conflicts: f64,
    pub oracle_violations: Option<f64>,
    pub exact_violations: f64,
}

impl MeanMetrics {
    pub fn of(runs: &[RunMetrics]) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let mean = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let planner = if runs.iter().all(|r| r.planner == runs[0].planner) {
            runs[0].planner.clone()
        } else {
            "mixed".to_string()
        };
        let oracle: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.oracle_violations)
            .map(|v| v as f64)
            .collect();
        Some(MeanMetrics {
            run: "mean".to_string(),
            planner,
            n_agents: mean(|r| r.n_agents as f64),
            plan_failures: mean(|r| r.plan_failures as f64),
            agent_conflicts: mean(|r| r.agent_conflicts as f64),
            section_conflicts: mean(|r| r.section_conflicts as f64),
            delayed: mean(|r| r.delayed as f64),
            replanned: mean(|r| r.replanned as f64),
            delayed_and_replanned: mean(|r| r.delayed_and_replanned as f64),
            unchanged: mean(|r| r.unchanged as f64),
            path_offset_attempts: mean(|r| r.path_offset_attempts as f64),
            replan_attempts: mean(|r| r.replan_attempts as f64),
            pf_time: mean(|r| r.pf_time),
            cr_time: mean(|r| r.cr_time),
            pf_cost: mean(|r| r.pf_cost),
            cr_cost: mean(|r| r.cr_cost),
            cost_overhead: mean(|r| r.cost_overhead),
            post_section_conflicts: mean(|r| r.post_section_conflicts as f64),
            oracle_violations: (!oracle.is_empty())
                .then(|| oracle.iter().sum::<f64>() / oracle.len() as f64),
            exact_violations: mean(|r| r.exact_violations as f64),
        })
    }
}

/// JSON report document. `mean` is present when there are two or more runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<MeanMetrics>,
}

impl Report {
    pub fn new(runs: Vec<RunMetrics>) -> Self {
        let mean = if runs.len() > 1 {
            MeanMetrics::of(&runs)
        } else {
            None
        };
        Report { runs, mean }
    }
}

pub fn emit_report(metrics: &[RunMetrics], format: ReportFormat) -> Result<String> {
    let report = Report::new(metrics.to_vec());
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => to_csv(&report),
        ReportFormat::Table => {
            let csv = to_csv(&report)?;
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(csv.as_bytes());
            let rows: Vec<Vec<String>> = rdr
                .records()
                .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
                .collect::<std::result::Result<_, _>>()?;
            Ok(align(&rows))
        }
    }
}

fn to_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if report.runs.is_empty() {
        // headers come from the first record; emit them from a blank row
        w.serialize(RunMetrics::default())?;
        let text = finish(w)?;
        return Ok(text
            .lines()
            .next()
            .map(|h| format!("{h}\n"))
            .unwrap_or_default());
    }
    for r in &report.runs {
        w.serialize(r)?;
    }
    if let Some(mean) = &report.mean {
        w.serialize(mean)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:>w$}", w = width[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
