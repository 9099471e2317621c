//! Minimal SVG line charts written straight from the run CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::RunResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlotKind {
    /// `sup F_α` and the bound against time.
    Certificate,
    /// Error against resolution, log-log.
    Convergence,
    /// Auxiliary function and its ceiling.
    Phi,
    /// Margin against the sweep axis.
    SweepMargin,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::Certificate, PlotKind::Convergence, PlotKind::Phi, PlotKind::SweepMargin];

    pub fn letter(self) -> char {
        match self {
            PlotKind::Certificate => 'a',
            PlotKind::Convergence => 'b',
            PlotKind::Phi => 'c',
            PlotKind::SweepMargin => 'd',
        }
    }

    pub fn from_letter(s: &str) -> Option<PlotKind> {
        PlotKind::ALL.into_iter().find(|k| s.len() == 1 && s.starts_with(k.letter()))
    }

    fn source(self) -> &'static str {
        match self {
            PlotKind::Certificate => "certificate_series.csv",
            PlotKind::Convergence => "convergence.csv",
            PlotKind::Phi => "phi.csv",
            PlotKind::SweepMargin => "sweep.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Default, Clone)]
pub struct PlotSummary {
    pub written: Vec<PathBuf>,
    /// Kinds whose source data is missing, with a reason.
    pub skipped: Vec<String>,
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.floor() as i32, hi.ceil() as i32);
        let step = ((b - a) / 6).max(1);
        (a..=b).step_by(step as usize).map(f64::from).filter(|e| *e >= lo - 1e-9 && *e <= hi + 1e-9).collect()
    } else {
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(raw);
        let start = (lo / step).ceil() as i64;
        let end = (hi / step).floor() as i64;
        (start..=end).map(|i| i as f64 * step).collect()
    }
}

impl Chart {
    /// Renders the chart; points that cannot be shown on a log axis are dropped.
    pub fn to_svg(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let usable = |&(x, y): &(f64, f64)| {
            x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
        };
        let all: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied().filter(usable))
            .map(|(x, y)| (tx(x), ty(y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if all.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 * y1.abs().max(1.0) {
            let pad = 0.5 * y1.abs().max(1.0);
            y0 -= pad;
            y1 += pad;
        } else {
            let pad = 0.05 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1, self.log_x) {
            let label = if self.log_x { format!("1e{t}") } else { fmt_num(t) };
            let x = px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
                MARGIN_TOP + ph,
                MARGIN_TOP + ph + 5.0,
                MARGIN_TOP + ph + 19.0
            );
        }
        for t in ticks(y0, y1, self.log_y) {
            let label = if self.log_y { format!("1e{t}") } else { fmt_num(t) };
            let y = py(t);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
                MARGIN_LEFT - 5.0,
                MARGIN_LEFT - 8.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            MARGIN_TOP + ph / 2.0,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (idx, series) in self.series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .copied()
                .filter(usable)
                .map(|(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y))))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN_TOP + 16.0 + 16.0 * idx as f64;
            let lx = MARGIN_LEFT + pw - 190.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.6"{dash}/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
                ly - 4.0,
                lx + 24.0,
                ly - 4.0,
                lx + 30.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Deserialize)]
struct SeriesRecord {
    bound_name: String,
    alpha: f64,
    t: f64,
    sup_f: f64,
    bound: f64,
}

#[derive(Debug, Deserialize)]
struct ConvergenceRecord {
    cells: f64,
    error: f64,
}

#[derive(Debug, Deserialize)]
struct PhiRecord {
    alpha: f64,
    t: f64,
    phi: f64,
    ceiling: f64,
}

#[derive(Debug, Deserialize)]
struct SweepRecord {
    axis: String,
    value: f64,
    bound_name: String,
    alpha: f64,
    margin: Option<f64>,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> RunResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

fn key(name: &str, alpha: f64) -> String {
    format!("{name} (alpha={alpha})")
}

/// Charts of one kind built from the run directory, with file stems.
pub fn charts(dir: &Path, kind: PlotKind) -> RunResult<Vec<(String, Chart)>> {
    let path = dir.join(kind.source());
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    match kind {
        PlotKind::Certificate => {
            let mut groups: BTreeMap<String, (String, f64, Vec<SeriesRecord>)> = BTreeMap::new();
            for r in read_rows::<SeriesRecord>(&path)? {
                let stem = format!("a_{}_alpha{}", r.bound_name, r.alpha);
                groups
                    .entry(stem)
                    .or_insert_with(|| (r.bound_name.clone(), r.alpha, Vec::new()))
                    .2
                    .push(r);
            }
            for (stem, (name, alpha, rows)) in groups {
                out.push((
                    stem,
                    Chart {
                        title: key(&name, alpha),
                        x_label: "t".into(),
                        y_label: "sup F".into(),
                        log_x: false,
                        log_y: false,
                        series: vec![
                            Series {
                                label: "measured sup F".into(),
                                points: rows.iter().map(|r| (r.t, r.sup_f)).collect(),
                                dashed: false,
                            },
                            Series {
                                label: "bound".into(),
                                points: rows.iter().map(|r| (r.t, r.bound)).collect(),
                                dashed: true,
                            },
                        ],
                    },
                ));
            }
        }
        PlotKind::Convergence => {
            let rows = read_rows::<ConvergenceRecord>(&path)?;
            if !rows.is_empty() {
                out.push((
                    "b_convergence".into(),
                    Chart {
                        title: "relative max error against the closed form".into(),
                        x_label: "cells".into(),
                        y_label: "error".into(),
                        log_x: true,
                        log_y: true,
                        series: vec![Series {
                            label: "error".into(),
                            points: rows.iter().map(|r| (r.cells, r.error)).collect(),
                            dashed: false,
                        }],
                    },
                ));
            }
        }
        PlotKind::Phi => {
            let mut groups: BTreeMap<String, Vec<PhiRecord>> = BTreeMap::new();
            for r in read_rows::<PhiRecord>(&path)? {
                groups.entry(format!("c_phi_alpha{}", r.alpha)).or_default().push(r);
            }
            for (stem, rows) in groups {
                let alpha = rows[0].alpha;
                out.push((
                    stem,
                    Chart {
                        title: format!("auxiliary function (alpha={alpha})"),
                        x_label: "t".into(),
                        y_label: "phi".into(),
                        log_x: true,
                        log_y: false,
                        series: vec![
                            Series {
                                label: "phi".into(),
                                points: rows.iter().map(|r| (r.t, r.phi)).collect(),
                                dashed: false,
                            },
                            Series {
                                label: "ceiling".into(),
                                points: rows.iter().map(|r| (r.t, r.ceiling)).collect(),
                                dashed: true,
                            },
                        ],
                    },
                ));
            }
        }
        PlotKind::SweepMargin => {
            let rows = read_rows::<SweepRecord>(&path)?;
            let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let axis = rows.first().map(|r| r.axis.clone()).unwrap_or_default();
            for r in &rows {
                if let Some(m) = r.margin {
                    groups.entry(key(&r.bound_name, r.alpha)).or_default().push((r.value, m));
                }
            }
            if !groups.is_empty() {
                out.push((
                    format!("d_margin_vs_{axis}"),
                    Chart {
                        title: format!("certificate margin along {axis}"),
                        x_label: axis,
                        y_label: "margin".into(),
                        log_x: false,
                        log_y: false,
                        series: groups
                            .into_iter()
                            .map(|(label, points)| Series {
                                label,
                                points,
                                dashed: false,
                            })
                            .collect(),
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// Writes `plots/<stem>.svg` for the requested kinds.
pub fn render(dir: &Path, kinds: &[PlotKind]) -> RunResult<PlotSummary> {
    let mut summary = PlotSummary::default();
    for &kind in kinds {
        let charts = charts(dir, kind)?;
        if charts.is_empty() {
            summary
                .skipped
                .push(format!("({}) skipped: no data in {}", kind.letter(), kind.source()));
            continue;
        }
        let plots = dir.join("plots");
        fs::create_dir_all(&plots)?;
        for (stem, chart) in charts {
            let path = plots.join(format!("{stem}.svg"));
            fs::write(&path, chart.to_svg())?;
            summary.written.push(path);
        }
    }
    Ok(summary)
}

pub fn render_run(dir: &Path) -> RunResult<PlotSummary> {
    render(dir, &PlotKind::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_each_series() {
        let chart = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "a".into(),
                    points: vec![(1.0, 1.0), (10.0, 0.1), (0.0, 1.0)],
                    dashed: false,
                },
                Series {
                    label: "b".into(),
                    points: vec![(1.0, 2.0), (10.0, 2.0)],
                    dashed: true,
                },
            ],
        };
        let svg = chart.to_svg();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_directory_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let summary = render_run(dir.path()).unwrap();
        assert!(summary.written.is_empty());
        assert_eq!(summary.skipped.len(), 4);
        assert!(!dir.path().join("plots").exists());
    }

    #[test]
    fn kind_letters_round_trip() {
        for k in PlotKind::ALL {
            assert_eq!(PlotKind::from_letter(&k.letter().to_string()), Some(k));
        }
        assert_eq!(PlotKind::from_letter("e"), None);
    }
}
