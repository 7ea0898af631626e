//! Trace CSV and SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::episode::EpisodeTrace;
use super::SimError;
use crate::model::wrap_angle;

pub const CSV_COLUMNS: [&str; 18] = [
    "t",
    "x",
    "y",
    "z",
    "u",
    "v",
    "w",
    "phi",
    "theta",
    "T_cmd",
    "phi_ref",
    "theta_ref",
    "ex",
    "ey",
    "ez",
    "e_yaw",
    "obs_dist_min",
    "solve_ms",
];

/// Column-major view of a trace as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub rows: Vec<[f64; 18]>,
}

impl TraceTable {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let rows = trace
            .records
            .iter()
            .map(|r| {
                let (p, v, u) = (r.state.position, r.state.velocity, r.input);
                let e = r.reference - p;
                [
                    r.t,
                    p.x,
                    p.y,
                    p.z,
                    v.x,
                    v.y,
                    v.z,
                    r.state.roll,
                    r.state.pitch,
                    u.thrust,
                    u.roll_ref,
                    u.pitch_ref,
                    e.x,
                    e.y,
                    e.z,
                    wrap_angle(r.heading_ref - r.heading),
                    r.obs_dist_min,
                    r.diagnostics.solve_ms,
                ]
            })
            .collect();
        Self { rows }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = CSV_COLUMNS.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.rows.iter().map(|r| Vector3::new(r[1], r[2], r[3])).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
        w.write_record(CSV_COLUMNS).map_err(|e| SimError::csv(path, e))?;
        for row in &self.rows {
            // 17 significant digits round-trip every f64.
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(|e| SimError::csv(path, e))?;
        }
        w.flush().map_err(|e| SimError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, SimError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| SimError::csv(path, e))?;
        let header = r.headers().map_err(|e| SimError::csv(path, e))?;
        if header.iter().ne(CSV_COLUMNS) {
            return Err(SimError::Format(format!(
                "{}: expected header {}",
                path.display(),
                CSV_COLUMNS.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| SimError::csv(path, e))?;
            if rec.len() != 18 {
                return Err(SimError::Format(format!(
                    "{}: row {} has {} fields",
                    path.display(),
                    i + 1,
                    rec.len()
                )));
            }
            let mut row = [0.0; 18];
            for (slot, field) in row.iter_mut().zip(rec.iter()) {
                *slot = field.trim().parse().map_err(|_| {
                    SimError::Format(format!("{}: row {}: bad number {field:?}", path.display(), i + 1))
                })?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(SimError::Format(format!("{}: trace is empty", path.display())));
        }
        Ok(Self { rows })
    }
}

pub fn emit_csv(trace: &EpisodeTrace, path: &Path) -> Result<(), SimError> {
    TraceTable::from_trace(trace).write_csv(path)
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    dashed: bool,
    values: Vec<f64>,
}

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 170.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 24.0;
const GAP: f64 = 46.0;

fn panel(svg: &mut String, index: usize, title: &str, t: &[f64], series: &[Series]) {
    let top = MARGIN_T + index as f64 * (PANEL_H + GAP);
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let finite = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let sx = |v: f64| MARGIN_L + (v - t0) / span_t * PANEL_W;
    let sy = |v: f64| top + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;

    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_L}" y="{:.1}" font-size="13">{title}</text>"#,
        top - 6.0
    );
    for (v, anchor) in [(hi, top + 10.0), (lo, top + PANEL_H)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{anchor:.1}" font-size="10" text-anchor="end">{v:.3}</text>"#,
            MARGIN_L - 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">t = {t1:.2} s</text>"#,
        MARGIN_L + PANEL_W,
        top + PANEL_H + 12.0
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = t
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&ti, &v)| format!("{:.2},{:.2}", sx(ti), sy(v)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.4"{dash} points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        let lx = MARGIN_L + PANEL_W + 10.0;
        let ly = top + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-size="11" fill="{}">{}</text>"#,
            s.color, s.label
        );
    }
}

/// Renders position vs reference per axis, attitude vs reference and the
/// tracking errors as stacked panels in one SVG.
pub fn render_svg(table: &TraceTable) -> String {
    let col = |n: &str| table.column(n).expect("known column");
    let t = col("t");
    let plus = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    let (x, y, z) = (col("x"), col("y"), col("z"));
    let (ex, ey, ez) = (col("ex"), col("ey"), col("ez"));
    let s = |label, color, dashed, values| Series {
        label,
        color,
        dashed,
        values,
    };
    let panels: Vec<(&str, Vec<Series>)> = vec![
        (
            "x (m)",
            vec![
                s("x", "#1f77b4", false, x.clone()),
                s("x_ref", "#1f77b4", true, plus(&x, &ex)),
            ],
        ),
        (
            "y (m)",
            vec![
                s("y", "#2ca02c", false, y.clone()),
                s("y_ref", "#2ca02c", true, plus(&y, &ey)),
            ],
        ),
        (
            "z (m)",
            vec![
                s("z", "#d62728", false, z.clone()),
                s("z_ref", "#d62728", true, plus(&z, &ez)),
            ],
        ),
        (
            "attitude (rad)",
            vec![
                s("phi", "#9467bd", false, col("phi")),
                s("phi_ref", "#9467bd", true, col("phi_ref")),
                s("theta", "#ff7f0e", false, col("theta")),
                s("theta_ref", "#ff7f0e", true, col("theta_ref")),
            ],
        ),
        (
            "tracking error (m)",
            vec![
                s("ex", "#1f77b4", false, ex),
                s("ey", "#2ca02c", false, ey),
                s("ez", "#d62728", false, ez),
            ],
        ),
    ];
    let width = MARGIN_L + PANEL_W + 90.0;
    let height = MARGIN_T + panels.len() as f64 * (PANEL_H + GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (title, series)) in panels.iter().enumerate() {
        panel(&mut svg, i, title, &t, series);
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg_plots(table: &TraceTable, path: &Path) -> Result<(), SimError> {
    std::fs::write(path, render_svg(table)).map_err(|e| SimError::io(path, e))
}
