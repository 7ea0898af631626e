//! Runs every scenario in a directory and aggregates the metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::episode::{run_episode, EpisodeStatus};
use super::metrics::{compute_metrics, Metrics};
use super::scenario::Scenario;
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub status: Option<EpisodeStatus>,
    pub metrics: Option<Metrics>,
    pub actions: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub mean_sr: f64,
    pub mean_spl: f64,
    /// Mean over episodes that produced a trace (NaN if none did).
    pub mean_ne: f64,
}

impl SuiteReport {
    /// Scenarios that failed to load or run count as SR = SPL = 0.
    pub fn from_rows(rows: Vec<SuiteRow>) -> Self {
        let n = rows.len().max(1) as f64;
        let sr = rows.iter().filter_map(|r| r.metrics).map(|m| m.sr).sum::<f64>() / n;
        let spl = rows.iter().filter_map(|r| r.metrics).map(|m| m.spl).sum::<f64>() / n;
        let ne: Vec<f64> = rows.iter().filter_map(|r| r.metrics).map(|m| m.ne).collect();
        let mean_ne = if ne.is_empty() {
            f64::NAN
        } else {
            ne.iter().sum::<f64>() / ne.len() as f64
        };
        Self {
            rows,
            mean_sr: sr,
            mean_spl: spl,
            mean_ne,
        }
    }

    /// Worst exit code among the episodes (0 if all succeeded).
    pub fn exit_code(&self) -> i32 {
        self.rows
            .iter()
            .map(|r| match r.status {
                Some(s) => s.exit_code(),
                None => 2,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_table(&self) -> String {
        let header = [
            "scenario",
            "status",
            "SR",
            "SPL",
            "NE (m)",
            "path (m)",
            "clearance (m)",
            "actions",
        ];
        let mut cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let status = match (&r.status, &r.error) {
                    (Some(s), _) => format!("{s:?}").to_lowercase(),
                    (None, _) => "error".to_string(),
                };
                match r.metrics {
                    Some(m) => vec![
                        r.scenario.clone(),
                        status,
                        format!("{:.0}", m.sr),
                        format!("{:.4}", m.spl),
                        format!("{:.3}", m.ne),
                        format!("{:.2}", m.path_length),
                        fmt_clearance(m.min_clearance),
                        r.actions.to_string(),
                    ],
                    None => vec![
                        r.scenario.clone(),
                        status,
                        "0".into(),
                        "0.0000".into(),
                        "-".into(),
                        "-".into(),
                        "-".into(),
                        "-".into(),
                    ],
                }
            })
            .collect();
        cells.push(vec![
            "mean".into(),
            String::new(),
            format!("{:.3}", self.mean_sr),
            format!("{:.4}", self.mean_spl),
            format!("{:.3}", self.mean_ne),
            String::new(),
            String::new(),
            String::new(),
        ]);
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].len())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in row.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        out.push_str(&line(&header.map(String::from)));
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        let last = cells.len() - 1;
        for (i, row) in cells.iter().enumerate() {
            if i == last {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
            out.push_str(&line(row));
            out.push('\n');
        }
        for r in &self.rows {
            if let Some(e) = &r.error {
                let _ = writeln!(out, "{}: {e}", r.scenario);
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let map = |e: csv::Error| SimError::Format(e.to_string());
        w.write_record([
            "scenario",
            "status",
            "sr",
            "spl",
            "ne",
            "path_length",
            "min_clearance",
            "actions",
            "error",
        ])
        .map_err(map)?;
        for r in &self.rows {
            let status = r
                .status
                .map(|s| format!("{s:?}").to_lowercase())
                .unwrap_or_else(|| "error".into());
            let m = r.metrics;
            let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
            w.write_record([
                r.scenario.clone(),
                status,
                f(m.map(|m| m.sr)),
                f(m.map(|m| m.spl)),
                f(m.map(|m| m.ne)),
                f(m.map(|m| m.path_length)),
                f(m.map(|m| m.min_clearance)),
                r.actions.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(map)?;
        }
        w.write_record([
            "mean".to_string(),
            String::new(),
            format!("{:.6}", self.mean_sr),
            format!("{:.6}", self.mean_spl),
            format!("{:.6}", self.mean_ne),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(map)?;
        let bytes = w.into_inner().map_err(|e| SimError::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn fmt_clearance(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "-".into()
    }
}

/// `*.json` files directly inside `dir`, sorted by file name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(path: &Path) -> SuiteRow {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let fail = |error: String| SuiteRow {
        scenario: name.clone(),
        status: None,
        metrics: None,
        actions: 0,
        error: Some(error),
    };
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    match run_episode(&scenario) {
        Ok(trace) => SuiteRow {
            scenario: scenario.name.clone(),
            status: Some(trace.status),
            metrics: Some(compute_metrics(&trace, &scenario, scenario.reference_length())),
            actions: trace.actions.len(),
            error: trace.message.clone().filter(|_| trace.status != EpisodeStatus::Success),
        },
        Err(e) => fail(e.to_string()),
    }
}

/// Runs all scenarios in parallel; results keep file-name order. Individual
/// failures are recorded and do not stop the suite.
pub fn run_suite(dir: &Path) -> Result<SuiteReport, SimError> {
    let files = scenario_files(dir)?;
    if files.is_empty() {
        return Err(SimError::Scenario(format!("no *.json scenarios in {}", dir.display())));
    }
    let rows = files.par_iter().map(|p| run_one(p)).collect();
    Ok(SuiteReport::from_rows(rows))
}

/// Writes `suite.txt` and `suite.csv` into `out`.
pub fn write_report(report: &SuiteReport, out: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(out).map_err(|e| SimError::io(out, e))?;
    let txt = out.join("suite.txt");
    std::fs::write(&txt, report.to_table()).map_err(|e| SimError::io(&txt, e))?;
    let csv = out.join("suite.csv");
    std::fs::write(&csv, report.to_csv()?).map_err(|e| SimError::io(&csv, e))
}
