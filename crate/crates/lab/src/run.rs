//! One scenario run: solve, certify, diagnose, write the run directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use leibenson::certify::{
    certify, cylinder_mask, lambda_bounds, CertificateReport, CertificateRequest, CylinderSpec,
    DEFAULT_MASK_THRESHOLD,
};
use leibenson::diagnostics::{
    bochner_points, bochner_residual, caccioppoli_check, iteration_schedule, sobolev_constant_estimate,
    sobolev_empirical_check, BochnerReport, CaccioppoliReport, CheckVerdict, TrialFunction, CACCIOPPOLI_SLACK, JK_TIGHT, JK_TOLERANCE,
};
use leibenson::exact::heat_kernel_harnack;
use leibenson::phi::{log_samples, PhiFast, PhiSlow};
use leibenson::solver::{solve, DerivedFields, RadialGrid, RadialTrajectory};
use leibenson::{DiffusionParams, Regime};

use crate::checks::{self, verdict, ConvergenceRow, DiagnosticRow, LiYauRow};
use crate::error::{RunError, RunResult};
use crate::plot;
use crate::scenario::{uniform_times, BochnerSpec, CaccioppoliSpec, Scenario, TrajectorySource};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub certify: bool,
    pub diagnose: bool,
    pub plots: bool,
}

impl RunOptions {
    pub const ALL: RunOptions = RunOptions {
        certify: true,
        diagnose: true,
        plots: true,
    };
}

/// Aggregate verdict of a run; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// No failure, but at least one verdict could not be decided.
    Inapplicable,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::Inapplicable => 3,
        }
    }

    pub fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inapplicable, _) | (_, Status::Inapplicable) => Status::Inapplicable,
            _ => Status::Pass,
        }
    }

    pub fn from_verdict(v: &str) -> Status {
        match v {
            "pass" => Status::Pass,
            "fail" | "error" => Status::Fail,
            _ => Status::Inapplicable,
        }
    }
}

/// One line of `certificates.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CertificateRow {
    pub scenario_id: String,
    pub bound_name: String,
    pub alpha: f64,
    #[serde(rename = "fraction_R")]
    pub fraction_r: f64,
    pub t1: f64,
    pub t2: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(rename = "sup_F")]
    pub sup_f: f64,
    pub bound: f64,
    pub margin: f64,
    pub verdict: String,
    /// Calibration constants for bounds that depend on them, empty otherwise.
    pub calibrated: String,
}

impl CertificateRow {
    fn new(scenario_id: &str, r: &CertificateReport) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            bound_name: r.bound_name.to_string(),
            alpha: r.alpha,
            fraction_r: r.cylinder.fraction_r,
            t1: r.cylinder.t1,
            t2: r.cylinder.t2,
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            sup_f: r.measured_sup_f,
            bound: r.bound_value,
            margin: r.margin,
            verdict: r.verdict.to_string(),
            calibrated: r.calibration.map(|c| c.to_string()).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SeriesRow<'a> {
    scenario_id: &'a str,
    bound_name: String,
    alpha: f64,
    t: f64,
    sup_f: f64,
    bound: f64,
    margin: f64,
    tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SnapshotRow<'a> {
    scenario_id: &'a str,
    t: f64,
    r: f64,
    u: f64,
    v: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiRow {
    pub scenario_id: String,
    pub alpha: f64,
    pub t: f64,
    pub phi: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    scenario_id: &'a str,
    code_version: &'a str,
    seed: u64,
    params_digest: String,
    regime: String,
    status: &'a str,
    error: Option<ErrorRecord>,
    cells: Option<usize>,
    steps: Option<u64>,
    eps_reg: Option<f64>,
    scenario: &'a Scenario,
}

#[derive(Debug, Clone, Serialize)]
struct ErrorRecord {
    kind: &'static str,
    message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub certificates: Vec<CertificateRow>,
    pub reports: Vec<CertificateReport>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub liyau: Vec<LiYauRow>,
    pub plots: Vec<PathBuf>,
    /// Relative max error against the closed form at the final snapshot.
    pub final_error: Option<f64>,
}

impl RunOutcome {
    pub fn status(&self) -> Status {
        self.certificates
            .iter()
            .map(|c| c.verdict.as_str())
            .chain(self.diagnostics.iter().map(|d| d.verdict.as_str()))
            .map(Status::from_verdict)
            .fold(Status::Pass, Status::combine)
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, scenario: &Scenario, status: &str, error: Option<&RunError>, traj: Option<&RadialTrajectory>) -> RunResult<()> {
    let regime = scenario
        .diffusion()
        .map(|p| p.regime().to_string())
        .unwrap_or_else(|_| "invalid".into());
    let manifest = Manifest {
        scenario_id: &scenario.id,
        code_version: CODE_VERSION,
        seed: scenario.seed,
        params_digest: scenario.digest(),
        regime,
        status,
        error: error.map(|e| ErrorRecord {
            kind: if e.is_config() { "configuration" } else { "run" },
            message: e.to_string(),
        }),
        cells: traj.map(|t| t.grid.cells()),
        steps: traj.map(|t| t.steps),
        eps_reg: traj.map(|t| t.eps_reg),
        scenario,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Runs the scenario into `out_root/<id>`. On error the manifest still
/// records the configuration and the error.
pub fn run_scenario(scenario: &Scenario, out_root: &Path, opts: RunOptions) -> RunResult<RunOutcome> {
    let dir = out_root.join(&scenario.id);
    fs::create_dir_all(&dir)?;
    write_manifest(&dir, scenario, "running", None, None)?;
    let mut solved = None;
    match execute(scenario, &dir, opts, &mut solved) {
        Ok(outcome) => {
            write_manifest(&dir, scenario, "complete", None, solved.as_ref())?;
            Ok(outcome)
        }
        Err(e) => {
            write_manifest(&dir, scenario, "error", Some(&e), solved.as_ref())?;
            Err(e)
        }
    }
}

/// Solves with `t0` prepended when the window starts later, then drops it.
fn solve_window(scenario: &Scenario, cells: usize, window: Vec<f64>) -> RunResult<RadialTrajectory> {
    let t0 = scenario.time.start;
    let prepend = window[0] > t0 + 1e-12;
    let mut times = window;
    if prepend {
        times.insert(0, t0);
    }
    let mut traj = solve(&scenario.problem(cells, times)?)?;
    if prepend {
        traj.times.remove(0);
        traj.u.remove(0);
    }
    Ok(traj)
}

fn execute(scenario: &Scenario, dir: &Path, opts: RunOptions, solved: &mut Option<RadialTrajectory>) -> RunResult<RunOutcome> {
    scenario.validate()?;
    let traj = solve(&scenario.problem(scenario.grid.cells, scenario.time.snapshot_times())?)?;
    let fields = traj.derived()?;
    write_snapshots(dir, scenario, &traj, &fields)?;
    *solved = Some(traj.clone());

    let mut outcome = RunOutcome {
        dir: dir.to_path_buf(),
        certificates: Vec::new(),
        reports: Vec::new(),
        diagnostics: Vec::new(),
        convergence: Vec::new(),
        liyau: Vec::new(),
        plots: Vec::new(),
        final_error: None,
    };
    if let Some(sol) = scenario.exact_solution()? {
        let t = *traj.times.last().unwrap();
        let nodes = traj.grid.nodes();
        let reference: Vec<f64> = nodes.iter().map(|&r| sol.eval(r, t)).collect();
        let peak = reference.iter().cloned().fold(0.0, f64::max);
        let worst = traj.u.last().unwrap().iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        outcome.final_error = Some(worst / peak);
    }

    if opts.certify && !scenario.certify.is_empty() {
        outcome.reports = certify_all(scenario, &traj, &fields)?;
        outcome.certificates = outcome.reports.iter().map(|r| CertificateRow::new(&scenario.id, r)).collect();
        let series: Vec<SeriesRow> = outcome
            .reports
            .iter()
            .flat_map(|r| {
                r.series.iter().map(move |p| SeriesRow {
                    scenario_id: &scenario.id,
                    bound_name: r.bound_name.to_string(),
                    alpha: r.alpha,
                    t: p.t,
                    sup_f: p.sup_f,
                    bound: p.bound,
                    margin: p.margin,
                    tolerance: p.tolerance,
                })
            })
            .collect();
        write_csv(&dir.join("certificates.csv"), &outcome.certificates)?;
        write_csv(&dir.join("certificate_series.csv"), &series)?;
    }

    if opts.diagnose {
        let base = DiagnosticRow {
            check_name: String::new(),
            scenario_id: scenario.id.clone(),
            params_digest: scenario.digest(),
            lhs: 0.0,
            rhs: 0.0,
            slack: 0.0,
            verdict: String::new(),
            seed: scenario.seed,
        };
        outcome.diagnostics = diagnose(scenario, &traj, &fields, &base, dir)?;
        if let Some(v) = &scenario.validation {
            let at = v.at_time.unwrap_or(scenario.time.end);
            outcome.convergence = checks::convergence_study(scenario, &v.cells, at)?;
            write_csv(&dir.join("convergence.csv"), &outcome.convergence)?;
        }
        if scenario.diagnostics.liyau_equality {
            outcome.liyau = liyau_rows(scenario, &traj, &fields);
            write_csv(&dir.join("liyau.csv"), &outcome.liyau)?;
        }
        if !outcome.diagnostics.is_empty() {
            write_csv(&dir.join("diagnostics.csv"), &outcome.diagnostics)?;
        }
    }

    if opts.plots {
        outcome.plots = plot::render_run(dir)?.written;
    }
    Ok(outcome)
}

fn write_snapshots(dir: &Path, scenario: &Scenario, traj: &RadialTrajectory, fields: &DerivedFields) -> RunResult<()> {
    let nodes = traj.grid.nodes();
    let mut w = csv::Writer::from_path(dir.join("snapshots.csv"))?;
    for (k, &t) in traj.times.iter().enumerate() {
        for (i, &r) in nodes.iter().enumerate() {
            w.serialize(SnapshotRow {
                scenario_id: &scenario.id,
                t,
                r,
                u: traj.u[k][i],
                v: fields.v[k][i],
                y: fields.y[k][i],
                z: fields.z[k][i],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Certifies every requested bound; the half-resolution run with the same
/// snapshots sets the discretization allowance.
pub fn certify_all(scenario: &Scenario, traj: &RadialTrajectory, fields: &DerivedFields) -> RunResult<Vec<CertificateReport>> {
    let half = scenario.grid.cells / 2;
    let coarse = if half >= RadialGrid::MIN_CELLS {
        let ct = solve(&scenario.problem(half, traj.times.clone())?)?;
        let cf = ct.derived()?;
        Some((ct, cf))
    } else {
        None
    };
    let reports = scenario
        .certify
        .par_iter()
        .map(|c| {
            let req = CertificateRequest {
                bound: c.bound,
                alpha: c.alpha,
                cylinder: CylinderSpec::new(c.fraction_r, c.t1, c.t2)?,
                calib: scenario.calib,
                mask_threshold: c.threshold,
            };
            certify(traj, fields, coarse.as_ref().map(|(t, f)| (t, f)), &req)
        })
        .collect::<leibenson::Result<Vec<_>>>()?;
    Ok(reports)
}

fn row(base: &DiagnosticRow, name: String, lhs: f64, rhs: f64, slack: f64, verdict: String) -> DiagnosticRow {
    DiagnosticRow {
        check_name: name,
        lhs,
        rhs,
        slack,
        verdict,
        ..base.clone()
    }
}

fn diagnose(scenario: &Scenario, traj: &RadialTrajectory, fields: &DerivedFields, base: &DiagnosticRow, dir: &Path) -> RunResult<Vec<DiagnosticRow>> {
    let d = &scenario.diagnostics;
    let params = scenario.diffusion()?;
    let manifold = scenario.model()?;
    let grid = scenario.radial_grid()?;
    let kcurv = manifold.ricci_lower_bound();
    let mut rows = Vec::new();

    for b in &d.bochner {
        let name = format!("bochner(alpha={},source={})", b.alpha, b.source.as_str());
        match bochner_report(scenario, b, scenario.grid.cells)? {
            None => rows.push(row(base, name, f64::NAN, f64::NAN, f64::NAN, CheckVerdict::Inconclusive.to_string())),
            Some(report) => {
                let worst = report
                    .samples
                    .iter()
                    .min_by(|a, b| (a.slack / a.tolerance).total_cmp(&(b.slack / b.tolerance)))
                    .expect("non-empty");
                rows.push(row(base, name, worst.lhs, worst.rhs, worst.slack + worst.tolerance, verdict(report.pass)));
            }
        }
    }

    for c in &d.caccioppoli {
        let report = caccioppoli_report(scenario, c, scenario.grid.cells)?;
        rows.push(row(
            base,
            format!("caccioppoli(alpha={},lambda={})", c.alpha, report.lambda),
            report.lhs,
            report.rhs,
            (1.0 + CACCIOPPOLI_SLACK) * report.rhs - report.lhs,
            report.verdict.to_string(),
        ));
    }

    if let Some(s) = &d.sobolev {
        let radius = s.radius.unwrap_or(0.5 * grid.radius());
        let trials = if s.trials.is_empty() {
            default_trials(manifold.dimension(), radius)
        } else {
            s.trials.clone()
        };
        let estimate = sobolev_constant_estimate(&manifold, radius, &scenario.calib, s.kappa)?;
        let check = sobolev_empirical_check(&manifold, radius, estimate.kappa, &trials, estimate.bound)?;
        // the constant is calibrated, so a miss indicts the calibration rather than the solution
        let v = if check.calibration_too_small {
            "calibration_too_small".to_string()
        } else {
            "pass".to_string()
        };
        rows.push(row(
            base,
            format!("sobolev(radius={radius},kappa={})", estimate.kappa),
            check.worst_ratio,
            check.bound,
            check.bound - check.worst_ratio,
            v,
        ));
    }

    if let Some(s) = &d.schedule {
        rows.extend(schedule_rows(base, grid.radius(), scenario.time.end, s.lambda, s.nu, s.depth)?);
    }

    if let Some(j) = &d.jk {
        let suite = checks::jk_random_suite(scenario.seed, j.draws, j.depth)?;
        let min_slack = suite.min_log_slack();
        rows.push(row(
            base,
            format!("jk_random(draws={},depth={})", j.draws, j.depth),
            min_slack,
            -JK_TOLERANCE,
            min_slack + JK_TOLERANCE,
            verdict(suite.extremal.iter().chain(&suite.sub_extremal).all(|r| r.pass)),
        ));
        let tight = suite.extremal.iter().map(|r| r.max_abs_log_slack).fold(0.0, f64::max);
        rows.push(row(base, "jk_extremal_tight".into(), tight, JK_TIGHT, JK_TIGHT - tight, verdict(suite.extremal_tight())));
        rows.push(row(
            base,
            "jk_collapse".into(),
            suite.collapse_gap,
            0.0,
            -suite.collapse_gap,
            verdict(suite.collapse_gap == 0.0),
        ));
    }

    if let Some(phi) = &d.phi {
        let mask = cylinder_mask(traj, &CylinderSpec::new(1.0, traj.times[0], *traj.times.last().unwrap())?, DEFAULT_MASK_THRESHOLD);
        match lambda_bounds(fields, &mask) {
            Ok((_, lmax)) => {
                rows.extend(checks::phi_rows(&params, phi.alpha, kcurv, lmax, phi.samples, base)?);
                let curve = phi_curve(&scenario.id, &params, phi.alpha, kcurv, lmax)?;
                if !curve.is_empty() {
                    write_csv(&dir.join("phi.csv"), &curve)?;
                }
            }
            Err(e) => rows.push(row(
                base,
                format!("phi(alpha={}): {e}", phi.alpha),
                f64::NAN,
                f64::NAN,
                f64::NAN,
                CheckVerdict::Inconclusive.to_string(),
            )),
        }
    }

    if d.liyau_equality {
        let n = manifold.dimension();
        let radii: Vec<f64> = grid.nodes();
        let gap = checks::liyau_equality_gap(n, &traj.times, &radii);
        rows.push(row(base, "liyau_equality".into(), gap, 1e-10, 1e-10 - gap, verdict(gap <= 1e-10)));
    }
    Ok(rows)
}

/// Pointwise check on the configured window at the given resolution; `None` when
/// the eroded mask leaves no interior sample.
pub fn bochner_report(scenario: &Scenario, spec: &BochnerSpec, cells: usize) -> RunResult<Option<BochnerReport>> {
    let window = uniform_times(spec.t_start, spec.t_end, spec.snapshots);
    let traj = match spec.source {
        TrajectorySource::Exact => {
            let sol = scenario.exact_solution()?.expect("validated");
            let grid = RadialGrid::new(scenario.grid.radius, cells)?;
            RadialTrajectory::from_exact(scenario.model()?, scenario.diffusion()?, grid, window, move |r, t| sol.eval(r, t))
        }
        TrajectorySource::Computed => solve_window(scenario, cells, window)?,
    };
    let fields = traj.derived()?;
    let mask = cylinder_mask(&traj, &CylinderSpec::new(1.0, spec.t_start, spec.t_end)?, spec.threshold);
    let points = bochner_points(&traj, &mask, spec.r_min, spec.stride);
    if points.is_empty() {
        return Ok(None);
    }
    Ok(Some(bochner_residual(&traj, &fields, spec.alpha, &mask, &points)?))
}

/// Energy inequality on the configured dense window at the given resolution.
pub fn caccioppoli_report(scenario: &Scenario, spec: &CaccioppoliSpec, cells: usize) -> RunResult<CaccioppoliReport> {
    let window = uniform_times(spec.t_start, spec.t_end, spec.snapshots);
    let traj = solve_window(scenario, cells, window)?;
    let fields = traj.derived()?;
    Ok(caccioppoli_check(&traj, &fields, &spec.cutoff()?, spec.lambda, spec.alpha)?)
}

fn default_trials(n: usize, radius: f64) -> Vec<TrialFunction> {
    let mut trials = vec![TrialFunction::Cone];
    for w in [0.5, 0.2, 0.1, 0.05] {
        trials.push(TrialFunction::LogBubble { width: w * radius });
        if n > 2 {
            trials.push(TrialFunction::Bubble { width: w * radius });
        }
    }
    trials
}

/// Dyadic identities of the shrinking-cylinder schedule.
pub fn schedule_rows(base: &DiagnosticRow, radius: f64, horizon: f64, lambda: f64, nu: f64, depth: usize) -> RunResult<Vec<DiagnosticRow>> {
    let steps = iteration_schedule(radius, horizon, lambda, nu, depth)?;
    let mut radius_err = 0.0f64;
    let mut gap_err = 0.0f64;
    let mut gap_ratio = f64::INFINITY;
    let mut exponent_err = 0.0f64;
    for w in steps.windows(2) {
        let k = w[0].k as i32;
        radius_err = radius_err.max(((w[0].radius_fraction - w[1].radius_fraction) - 0.5f64.powi(k + 2)).abs());
        let gap = w[1].time_fraction - w[0].time_fraction;
        gap_err = gap_err.max((gap - 0.5f64.powi(k + 1)).abs());
        gap_ratio = gap_ratio.min(gap / 0.5f64.powi(k + 2));
        exponent_err = exponent_err.max((w[1].exponent / w[0].exponent - (1.0 + nu)).abs() / (1.0 + nu));
    }
    Ok(vec![
        row(base, "schedule_radius_step".into(), radius_err, 0.0, -radius_err, verdict(radius_err == 0.0)),
        row(base, "schedule_time_step".into(), gap_err, 0.0, -gap_err, verdict(gap_err == 0.0)),
        row(base, "schedule_time_gap_ratio".into(), gap_ratio, 1.0, gap_ratio - 1.0, verdict(gap_ratio >= 1.0)),
        row(base, "schedule_exponent_growth".into(), exponent_err, 1e-12, 1e-12 - exponent_err, verdict(exponent_err <= 1e-12)),
    ])
}

/// `φ(t)` with its ceiling on a log grid, for the plot.
pub fn phi_curve(scenario_id: &str, params: &DiffusionParams, alpha: f64, kcurv: f64, lmax: f64) -> RunResult<Vec<PhiRow>> {
    let (values, ceiling): (Box<dyn Fn(f64) -> f64>, f64) = match params.regime() {
        Regime::Slow => {
            let (big_a, a, b) = params.slow_constants(alpha)?.phi_parameters(kcurv, lmax);
            let phi = PhiSlow::build(big_a, a, b)?;
            if phi == PhiSlow::Zero {
                return Ok(Vec::new());
            }
            (Box::new(move |t| phi.value(t)), phi.ceiling())
        }
        Regime::Fast => {
            let fc = params.fast_constants_default(alpha)?;
            let (a, b) = fc.phi_coefficients(kcurv, lmax);
            let phi = PhiFast::build(a, b, 1.0)?;
            (Box::new(move |t| phi.value(t)), phi.ceiling())
        }
        _ => return Ok(Vec::new()),
    };
    Ok(log_samples(1e-4, 1e3, 200)
        .into_iter()
        .map(|t| PhiRow {
            scenario_id: scenario_id.to_string(),
            alpha,
            t,
            phi: values(t),
            ceiling,
        })
        .collect())
}

/// Closed-form and computed `|∇u|²/u² - ∂_t u/u` on the interior of every
/// stored snapshot except the first and last.
fn liyau_rows(scenario: &Scenario, traj: &RadialTrajectory, fields: &DerivedFields) -> Vec<LiYauRow> {
    let n = scenario.manifold.dimension;
    let nodes = traj.grid.nodes();
    let interior = nodes.len() / 2;
    let mut rows = Vec::new();
    for k in 1..traj.times.len() - 1 {
        let t = traj.times[k];
        for i in (0..interior).step_by(4) {
            rows.push(LiYauRow {
                scenario_id: scenario.id.clone(),
                t,
                r: nodes[i],
                exact_quantity: heat_kernel_harnack(n, nodes[i], t, 1.0),
                computed_quantity: fields.y[k][i] - fields.z[k][i],
                n_over_2t: n as f64 / (2.0 * t),
            });
        }
    }
    rows
}
