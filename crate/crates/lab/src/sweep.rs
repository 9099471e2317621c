//! Parameter sweeps over a template scenario.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{RunError, RunResult};
use crate::plot::{self, PlotKind};
use crate::run::{run_scenario, write_csv, RunOptions, Status};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    P,
    Q,
    Alpha,
    /// Ricci lower bound `K = (n-1)k`.
    Curvature,
    Radius,
    Cells,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::P => "p",
            Axis::Q => "q",
            Axis::Alpha => "alpha",
            Axis::Curvature => "K",
            Axis::Radius => "R",
            Axis::Cells => "m",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = RunError;

    fn from_str(s: &str) -> RunResult<Self> {
        Ok(match s {
            "p" => Axis::P,
            "q" => Axis::Q,
            "alpha" => Axis::Alpha,
            "K" | "k" => Axis::Curvature,
            "R" | "r" => Axis::Radius,
            "m" => Axis::Cells,
            _ => {
                return Err(RunError::Config {
                    field: "axis".into(),
                    reason: format!("unknown axis `{s}`; expected one of p, q, alpha, K, R, m"),
                })
            }
        })
    }
}

fn id_fragment(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

/// The template with one coordinate replaced.
pub fn apply(template: &Scenario, axis: Axis, value: f64) -> RunResult<Scenario> {
    let mut s = template.clone();
    s.id = format!("{}-{}{}", template.id, axis, id_fragment(value));
    match axis {
        Axis::P => s.params.p = value,
        Axis::Q => s.params.q = value,
        Axis::Alpha => {
            for c in &mut s.certify {
                c.alpha = value;
            }
        }
        Axis::Curvature => {
            let n = s.manifold.dimension;
            if n < 2 {
                return Err(RunError::Config {
                    field: "axis".into(),
                    reason: "curvature sweeps need dimension at least 2".into(),
                });
            }
            s.manifold.curvature = value / (n as f64 - 1.0);
        }
        Axis::Radius => s.grid.radius = value,
        Axis::Cells => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(RunError::Config {
                    field: "axis".into(),
                    reason: format!("cell counts must be positive integers, got {value}"),
                });
            }
            s.grid.cells = value as usize;
        }
    }
    Ok(s)
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scenario_id: String,
    pub bound_name: String,
    pub alpha: f64,
    #[serde(rename = "sup_F")]
    pub sup_f: Option<f64>,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub verdict: String,
    /// Relative max error against the closed form at the final time.
    pub solution_error: Option<f64>,
    /// Observed order between this point and the previous resolution.
    pub order: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub rows: Vec<SweepRow>,
}

impl SweepOutcome {
    pub fn status(&self) -> Status {
        self.rows
            .iter()
            .map(|r| Status::from_verdict(&r.verdict))
            .fold(Status::Pass, Status::combine)
    }
}

/// Runs every point on a pool of `workers` threads. Rows are ordered by axis
/// value, then by the template's certificate order.
pub fn run_sweep(template: &Scenario, axis: Axis, values: &[f64], out_root: &Path, workers: usize) -> RunResult<SweepOutcome> {
    template.validate()?;
    if values.is_empty() {
        return Err(RunError::Config {
            field: "values".into(),
            reason: "sweep needs at least one value".into(),
        });
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let dir = out_root.join(format!("{}-sweep-{}", template.id, axis));
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Config {
            field: "workers".into(),
            reason: e.to_string(),
        })?;
    let opts = RunOptions {
        certify: true,
        diagnose: false,
        plots: false,
    };
    let points: Vec<Vec<SweepRow>> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let failed = |id: String, e: RunError| SweepRow {
                    axis: axis.to_string(),
                    value,
                    scenario_id: id,
                    bound_name: String::new(),
                    alpha: f64::NAN,
                    sup_f: None,
                    bound: None,
                    margin: None,
                    verdict: "error".into(),
                    solution_error: None,
                    order: None,
                    error: e.to_string(),
                };
                let scenario = match apply(template, axis, value).and_then(|s| s.validate().map(|_| s)) {
                    Ok(s) => s,
                    Err(e) => return vec![failed(format!("{}-{}{}", template.id, axis, id_fragment(value)), e)],
                };
                match run_scenario(&scenario, &dir, opts) {
                    Err(e) => vec![failed(scenario.id.clone(), e)],
                    Ok(outcome) => {
                        let rows: Vec<SweepRow> = outcome
                            .certificates
                            .iter()
                            .map(|c| SweepRow {
                                axis: axis.to_string(),
                                value,
                                scenario_id: scenario.id.clone(),
                                bound_name: c.bound_name.clone(),
                                alpha: c.alpha,
                                sup_f: Some(c.sup_f),
                                bound: Some(c.bound),
                                margin: Some(c.margin),
                                verdict: c.verdict.clone(),
                                solution_error: outcome.final_error,
                                order: None,
                                error: String::new(),
                            })
                            .collect();
                        if rows.is_empty() {
                            vec![SweepRow {
                                axis: axis.to_string(),
                                value,
                                scenario_id: scenario.id.clone(),
                                bound_name: String::new(),
                                alpha: f64::NAN,
                                sup_f: None,
                                bound: None,
                                margin: None,
                                verdict: "pass".into(),
                                solution_error: outcome.final_error,
                                order: None,
                                error: String::new(),
                            }]
                        } else {
                            rows
                        }
                    }
                }
            })
            .collect()
    });
    let mut rows: Vec<SweepRow> = points.into_iter().flatten().collect();
    if axis == Axis::Cells {
        fill_orders(&mut rows);
    }
    write_csv(&dir.join("sweep.csv"), &rows)?;
    plot::render(&dir, &[PlotKind::SweepMargin])?;
    Ok(SweepOutcome { dir, rows })
}

/// Observed order along a resolution axis: from the closed-form error when
/// present, otherwise from three consecutive suprema (Richardson).
fn fill_orders(rows: &mut [SweepRow]) {
    let mut by_key: std::collections::BTreeMap<(String, String), Vec<usize>> = Default::default();
    for (i, r) in rows.iter().enumerate() {
        by_key.entry((r.bound_name.clone(), format!("{}", r.alpha))).or_default().push(i);
    }
    for idx in by_key.values() {
        for w in 1..idx.len() {
            let (a, b) = (&rows[idx[w - 1]], &rows[idx[w]]);
            let ratio = (b.value / a.value).ln();
            let order = match (a.solution_error, b.solution_error) {
                (Some(ea), Some(eb)) if ea > 0.0 && eb > 0.0 => Some((ea / eb).ln() / ratio),
                _ if w >= 2 => {
                    let z = &rows[idx[w - 2]];
                    match (z.sup_f, a.sup_f, b.sup_f) {
                        (Some(s0), Some(s1), Some(s2)) if (s1 - s2).abs() > 0.0 => {
                            Some(((s0 - s1).abs() / (s1 - s2).abs()).ln() / ratio)
                        }
                        _ => None,
                    }
                }
                _ => None,
            };
            rows[idx[w]].order = order;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names() {
        for a in [Axis::P, Axis::Q, Axis::Alpha, Axis::Curvature, Axis::Radius, Axis::Cells] {
            assert_eq!(a.as_str().parse::<Axis>().unwrap(), a);
        }
        assert!("delta".parse::<Axis>().unwrap_err().is_config());
    }

    #[test]
    fn id_fragments_are_valid_names() {
        assert_eq!(id_fragment(1.5), "1p5");
        assert_eq!(id_fragment(-0.25), "m0p25");
    }
}
