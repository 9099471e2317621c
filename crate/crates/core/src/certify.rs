//! Gradient-estimate bounds and their certification along a trajectory.
//!
//! A certificate compares, snapshot by snapshot, the largest value of `F_α`
//! over a masked space-time cylinder with the bound evaluated at the same
//! time. The report carries the snapshot with the smallest margin.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::{DiffusionParams, FastConstants, FastSlack, Regime, SlowConstants};
use crate::solver::{DerivedFields, RadialTrajectory};

/// Nodes with `u` below this fraction of the snapshot maximum are masked out.
pub const DEFAULT_MASK_THRESHOLD: f64 = 1e-3;
/// Relative part of the certificate tolerance.
pub const CERT_REL_TOL: f64 = 1e-6;
/// Half-width (in nodes) of the derivative stencils; masked nodes are eroded by it.
const STENCIL_REACH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub fraction_r: f64,
    pub t1: f64,
    pub t2: f64,
}

impl CylinderSpec {
    pub fn new(fraction_r: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(fraction_r > 0.0 && fraction_r <= 1.0) {
            return Err(LabError::param("fraction_r", format!("must lie in (0, 1], got {fraction_r}")));
        }
        if !(t1 >= 0.0 && t2 > t1) {
            return Err(LabError::param("t1", format!("need 0 <= t1 < t2, got [{t1}, {t2}]")));
        }
        Ok(Self { fraction_r, t1, t2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    SlowGlobal,
    SlowBall,
    /// Fast global bound with slack parameters optimized per snapshot.
    FastGlobal,
    /// Fast global bound with the default slack parameters.
    FastGlobalDefault,
    #[serde(rename = "liyau")]
    LiYau,
    #[serde(rename = "liyauglobal")]
    LiYauGlobal,
    #[serde(rename = "closedres")]
    ClosedRes,
    #[serde(rename = "vazglobal")]
    VazGlobal,
}

impl BoundName {
    pub const ALL: [BoundName; 8] = [
        BoundName::SlowGlobal,
        BoundName::SlowBall,
        BoundName::FastGlobal,
        BoundName::FastGlobalDefault,
        BoundName::LiYau,
        BoundName::LiYauGlobal,
        BoundName::ClosedRes,
        BoundName::VazGlobal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundName::SlowGlobal => "slow_global",
            BoundName::SlowBall => "slow_ball",
            BoundName::FastGlobal => "fast_global",
            BoundName::FastGlobalDefault => "fast_global_default",
            BoundName::LiYau => "liyau",
            BoundName::LiYauGlobal => "liyauglobal",
            BoundName::ClosedRes => "closedres",
            BoundName::VazGlobal => "vazglobal",
        }
    }

    /// Regime whose trajectories this bound applies to.
    pub fn regime(&self) -> Regime {
        match self {
            BoundName::SlowGlobal | BoundName::SlowBall | BoundName::ClosedRes | BoundName::VazGlobal => Regime::Slow,
            BoundName::FastGlobal | BoundName::FastGlobalDefault => Regime::Fast,
            BoundName::LiYau | BoundName::LiYauGlobal => Regime::Borderline,
        }
    }

    /// Bounds with unpinned constants; their verdicts hold only for the
    /// supplied calibration.
    pub fn is_calibrated(&self) -> bool {
        matches!(self, BoundName::SlowBall | BoundName::LiYau)
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundName {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        BoundName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| LabError::param("bound_name", format!("unknown bound `{s}`")))
    }
}

/// Constants the estimates leave unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    pub c: f64,
    pub c_prime: f64,
    pub c_n: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_prime: 1.0,
            c_n: 1.0,
        }
    }
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C={};C'={};C_n={}", self.c, self.c_prime, self.c_n)
    }
}

/// `C0/t + α² n K δ² Λ_max / ((p-1)(α-1))`.
pub fn slow_global_bound(consts: &SlowConstants, t: f64, curvature_bound: f64, lambda_max: f64) -> f64 {
    consts.big_c0 / t + curvature_summand(consts, curvature_bound, lambda_max)
}

fn curvature_summand(consts: &SlowConstants, curvature_bound: f64, lambda_max: f64) -> f64 {
    if curvature_bound == 0.0 {
        0.0
    } else {
        consts.curvature_term(curvature_bound, lambda_max)
    }
}

/// Local bound on a ball of radius `radius`, with the unspecified constants
/// taken from `calib` (`c`, `c_prime`).
pub fn slow_ball_bound(
    consts: &SlowConstants,
    t: f64,
    curvature_bound: f64,
    radius: f64,
    lambda_min: f64,
    lambda_max: f64,
    calib: &Calibration,
) -> f64 {
    let spread = 1.0 + curvature_bound.sqrt() * radius;
    let expo = calib.c_prime / spread;
    let prefactor = (calib.c * t / lambda_min).powf(expo);
    let bracket = 1.0 / t + lambda_max * spread / (radius * radius);
    prefactor * consts.big_c0 * bracket.powf(1.0 + expo) + curvature_summand(consts, curvature_bound, lambda_max)
}

/// `C1/(ε3 t) + √(4(c0-ε2)(c_D K Λ_max)² / ((4c1(c0-ε2) - c2²) ε2))`.
pub fn fast_global_bound(fc: &FastConstants, t: f64, curvature_bound: f64, lambda_max: f64) -> Result<f64> {
    fc.check_slack(fc.slack)?;
    Ok(fast_bound_unchecked(fc, fc.slack, t, curvature_bound, lambda_max))
}

fn fast_bound_unchecked(fc: &FastConstants, s: FastSlack, t: f64, curvature_bound: f64, lambda_max: f64) -> f64 {
    let decay = fc.big_c1 / (s.eps3 * t);
    if curvature_bound == 0.0 {
        return decay;
    }
    let r = fc.c0 - s.eps2;
    let k = (fc.c_gap * curvature_bound * lambda_max).powi(2);
    decay + (4.0 * r * k / ((4.0 * fc.c1 * r - fc.c2 * fc.c2) * s.eps2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsOptimum {
    pub slack: FastSlack,
    pub bound: f64,
    pub default_bound: f64,
    /// Best bound found so far, after each refinement stage.
    pub trace: Vec<f64>,
}

/// Required positive margin of each feasibility inequality at the optimum.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Minimizes the fast global bound over feasible slack parameters by a
/// log-spaced scan in `eps2` followed by golden-section refinement. For each
/// `eps2`, `eps1` is pinned small and `eps3` sits just inside its boundary.
pub fn optimize_eps(
    params: &DiffusionParams,
    alpha: f64,
    t: f64,
    curvature_bound: f64,
    lambda_max: f64,
) -> Result<EpsOptimum> {
    let fc = params.fast_constants_default(alpha)?;
    let default_bound = fast_global_bound(&fc, t, curvature_bound, lambda_max)?;
    let (c0, c1, c2) = (fc.c0, fc.c1, fc.c2);
    let disc = fc.discriminant();
    assert!(disc > 0.0, "fast regime guarantees a positive discriminant");
    let eps2_max = c0 - c2 * c2 / (4.0 * c1);
    let eps2_hi = eps2_max - (1e-6 * eps2_max).max(2.0 * FEASIBILITY_SLACK / (4.0 * c1));
    let eps2_lo = 1e-9 * eps2_max;
    let eps1 = 1e-6 * c2.max(c1);
    let margin = FEASIBILITY_SLACK * disc.max(1.0) * 2.0;
    let slack_for = |eps2: f64| -> Option<FastSlack> {
        let r = c0 - eps2;
        let eps3 = c1 - (c2 + eps1).powi(2) / (4.0 * r) - margin / (4.0 * r);
        let s = FastSlack { eps1, eps2, eps3 };
        let ok = fc.feasibility_margins(s).iter().all(|&m| m >= FEASIBILITY_SLACK) && eps3 > 0.0;
        ok.then_some(s)
    };
    let value = |x: f64| -> f64 {
        slack_for(x.exp())
            .map(|s| fast_bound_unchecked(&fc, s, t, curvature_bound, lambda_max))
            .unwrap_or(f64::INFINITY)
    };
    let mut trace = Vec::new();
    let (a, b) = (eps2_lo.ln(), eps2_hi.ln());
    let samples = 200;
    let grid: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let x = a + (b - a) * i as f64 / samples as f64;
            (x, value(x))
        })
        .collect();
    let best = (0..grid.len()).min_by(|&i, &j| grid[i].1.total_cmp(&grid[j].1)).unwrap();
    trace.push(grid[best].1);
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].0, grid[(best + 1).min(samples)].0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (value(x1), value(x2));
    let mut best_x = grid[best].0;
    let mut best_f = grid[best].1;
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = value(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = value(x2);
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best_f {
                best_f = f;
                best_x = x;
            }
        }
        trace.push(best_f);
    }
    let (slack, bound) = match slack_for(best_x.exp()) {
        Some(s) if best_f <= default_bound => (s, best_f),
        _ => (fc.slack, default_bound),
    };
    let margins = fc.feasibility_margins(slack);
    if !margins.iter().all(|&m| m > 0.0) {
        return Err(LabError::Infeasible(format!("optimizer left the feasible region: {margins:?}")));
    }
    Ok(EpsOptimum {
        slack,
        bound,
        default_bound,
        trace,
    })
}

/// Published reference bounds, evaluated verbatim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceBound {
    /// Local heat-equation bound on a ball; `calib_c` is its unnamed constant.
    LiYau {
        n: usize,
        alpha: f64,
        t: f64,
        curvature_bound: f64,
        radius: f64,
        calib_c: f64,
    },
    LiYauGlobal {
        n: usize,
        alpha: f64,
        t: f64,
        curvature_bound: f64,
    },
    ClosedRes {
        n: usize,
        alpha: f64,
        t: f64,
        p: f64,
        delta: f64,
        curvature_bound: f64,
        lambda_max: f64,
    },
    VazGlobal {
        n: usize,
        alpha: f64,
        t: f64,
        delta: f64,
        curvature_bound: f64,
        lambda_max: f64,
    },
}

pub fn reference_bound(kind: ReferenceBound) -> Result<f64> {
    let check = |alpha: f64, t: f64| -> Result<()> {
        if !(alpha > 1.0) {
            return Err(LabError::param("alpha", format!("reference bounds need alpha > 1, got {alpha}")));
        }
        if !(t > 0.0) {
            return Err(LabError::param("t", format!("must be positive, got {t}")));
        }
        Ok(())
    };
    let curv = |k: f64, x: f64| if k == 0.0 { 0.0 } else { x };
    match kind {
        ReferenceBound::LiYau {
            n,
            alpha,
            t,
            curvature_bound: k,
            radius,
            calib_c,
        } => {
            check(alpha, t)?;
            if !(radius > 0.0) {
                return Err(LabError::param("radius", "must be positive"));
            }
            let a2 = alpha * alpha;
            let n = n as f64;
            Ok(a2 * n / t
                + calib_c * a2 / (radius * radius) * (a2 / (alpha - 1.0) + k.sqrt() * radius)
                + a2 * n * k / (2.0 * (alpha - 1.0)))
        }
        ReferenceBound::LiYauGlobal {
            n,
            alpha,
            t,
            curvature_bound: k,
        } => {
            check(alpha, t)?;
            let a2 = alpha * alpha;
            let n = n as f64;
            Ok(a2 * n / t + a2 * n * k / (2.0 * (alpha - 1.0)))
        }
        ReferenceBound::ClosedRes {
            n,
            alpha,
            t,
            p,
            delta,
            curvature_bound: k,
            lambda_max,
        } => {
            check(alpha, t)?;
            if !(delta > 0.0 && p > 1.0) {
                return Err(LabError::param("delta", "closedres needs delta > 0 and p > 1"));
            }
            let a2 = alpha * alpha;
            let n = n as f64;
            Ok(a2 * n * delta / (p * (p - 1.0) * t)
                + curv(k, a2 * n * k * delta * delta * lambda_max / (4.0 * (alpha - 1.0))))
        }
        ReferenceBound::VazGlobal {
            n,
            alpha,
            t,
            delta,
            curvature_bound: k,
            lambda_max,
        } => {
            check(alpha, t)?;
            if !(delta > 0.0) {
                return Err(LabError::param("delta", "vazglobal needs delta > 0"));
            }
            let a2 = alpha * alpha;
            let n = n as f64;
            let denom = n * delta + 2.0;
            Ok(a2 * n * delta / (denom * t)
                + curv(k, a2 * n * k * delta * delta * lambda_max / (denom * (alpha - 1.0))))
        }
    }
}

/// Masked cylinder: `mask[k][i]` selects snapshot `k`, node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMask {
    pub mask: Vec<Vec<bool>>,
    pub threshold: f64,
}

impl CylinderMask {
    pub fn count(&self) -> usize {
        self.mask.iter().flatten().filter(|&&b| b).count()
    }

    pub fn snapshot_has_nodes(&self, k: usize) -> bool {
        self.mask[k].iter().any(|&b| b)
    }
}

/// Selects nodes with `r ≤ fraction_r·R`, `t1 ≤ t ≤ t2` and `u ≥ threshold·max u`.
/// A node is kept only if every node its derivative stencils touch (two
/// neighbours in space, one in time) also passes the threshold.
pub fn cylinder_mask(traj: &RadialTrajectory, cyl: &CylinderSpec, threshold: f64) -> CylinderMask {
    let m = traj.grid.cells();
    let nodes = traj.grid.nodes();
    let r_max = cyl.fraction_r * traj.grid.radius() * (1.0 + 1e-12);
    let above: Vec<Vec<bool>> = traj
        .u
        .iter()
        .map(|u| {
            let top = u.iter().cloned().fold(0.0, f64::max);
            u.iter().map(|&x| x >= threshold * top && (threshold == 0.0 || x > 0.0)).collect()
        })
        .collect();
    let ks = traj.times.len();
    let mask = (0..ks)
        .map(|k| {
            let t = traj.times[k];
            let in_window = t >= cyl.t1 && t <= cyl.t2 && t > 0.0;
            (0..m)
                .map(|i| {
                    if !in_window || nodes[i] > r_max {
                        return false;
                    }
                    let lo = i.saturating_sub(STENCIL_REACH);
                    let hi = (i + STENCIL_REACH).min(m - 1);
                    let klo = k.saturating_sub(1);
                    let khi = (k + 1).min(ks - 1);
                    (klo..=khi).all(|kk| (lo..=hi).all(|ii| above[kk][ii]))
                })
                .collect()
        })
        .collect();
    CylinderMask { mask, threshold }
}

/// `(Λ_min, Λ_max)` over the masked cylinder.
pub fn lambda_bounds(fields: &DerivedFields, mask: &CylinderMask) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, row) in mask.mask.iter().enumerate() {
        for (i, &on) in row.iter().enumerate() {
            if on {
                let l = fields.lambda[k][i];
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
    }
    if mask.count() == 0 {
        return Err(LabError::Hypothesis("masked cylinder is empty".into()));
    }
    if !(lo > 0.0) {
        return Err(LabError::Hypothesis(format!("Lambda_min = {lo:e} is not positive")));
    }
    Ok((lo, hi))
}

/// `F_α` at one node: `y - αz` (slow, borderline) or `y + αz` (fast).
pub fn f_alpha(regime: Regime, alpha: f64, y: f64, z: f64) -> f64 {
    match regime {
        Regime::Fast | Regime::FastInvalid => y + alpha * z,
        Regime::Slow | Regime::Borderline => y - alpha * z,
    }
}

pub fn check_alpha(regime: Regime, alpha: f64) -> Result<()> {
    let ok = match regime {
        Regime::Slow => alpha > 1.0,
        Regime::Borderline => alpha >= 1.0,
        Regime::Fast => alpha > 0.0 && alpha < 1.0,
        Regime::FastInvalid => {
            return Err(LabError::WrongRegime {
                expected: "slow, fast or borderline",
                found: regime,
            })
        }
    };
    if ok && alpha.is_finite() {
        Ok(())
    } else {
        Err(LabError::param("alpha", format!("alpha = {alpha} is outside the range of the {regime} regime")))
    }
}

/// Per-snapshot maximum of `F_α` over masked nodes; `None` for snapshots
/// without masked nodes.
pub fn sup_f_series(
    traj: &RadialTrajectory,
    fields: &DerivedFields,
    mask: &CylinderMask,
    alpha: f64,
) -> Result<Vec<Option<f64>>> {
    let regime = traj.params.regime();
    check_alpha(regime, alpha)?;
    Ok(mask
        .mask
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(i, _)| f_alpha(regime, alpha, fields.y[k][i], fields.z[k][i]))
                .reduce(f64::max)
        })
        .collect())
}

/// Maximum of `F_α` over the whole masked cylinder.
pub fn sup_f_alpha(traj: &RadialTrajectory, fields: &DerivedFields, mask: &CylinderMask, alpha: f64) -> Result<f64> {
    sup_f_series(traj, fields, mask, alpha)?
        .into_iter()
        .flatten()
        .reduce(f64::max)
        .ok_or_else(|| LabError::Hypothesis("masked cylinder is empty".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inapplicable => "inapplicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRequest {
    pub bound: BoundName,
    pub alpha: f64,
    pub cylinder: CylinderSpec,
    pub calib: Calibration,
    pub mask_threshold: f64,
}

/// Measured supremum against the bound at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificatePoint {
    pub t: f64,
    pub sup_f: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub bound_name: BoundName,
    pub alpha: f64,
    pub cylinder: CylinderSpec,
    /// Snapshot time with the smallest margin.
    pub t_star: f64,
    pub measured_sup_f: f64,
    pub bound_value: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub allowance: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub verdict: Verdict,
    pub calibration: Option<Calibration>,
    pub cells: usize,
    pub eps_reg: f64,
    pub mask_threshold: f64,
    pub masked_nodes: usize,
    pub slack: Option<FastSlack>,
    pub note: String,
    pub series: Vec<CertificatePoint>,
}

/// Certifies one bound. `coarse` is the same run on half the cells with the
/// same snapshot times; the difference of the two suprema is added to the
/// tolerance.
pub fn certify(
    traj: &RadialTrajectory,
    fields: &DerivedFields,
    coarse: Option<(&RadialTrajectory, &DerivedFields)>,
    req: &CertificateRequest,
) -> Result<CertificateReport> {
    let regime = traj.params.regime();
    if req.bound.regime() != regime {
        return Err(LabError::WrongRegime {
            expected: match req.bound.regime() {
                Regime::Slow => "slow",
                Regime::Fast => "fast",
                _ => "borderline",
            },
            found: regime,
        });
    }
    check_alpha(regime, req.alpha)?;
    let mask = cylinder_mask(traj, &req.cylinder, req.mask_threshold);
    let mut report = CertificateReport {
        bound_name: req.bound,
        alpha: req.alpha,
        cylinder: req.cylinder,
        t_star: f64::NAN,
        measured_sup_f: f64::NAN,
        bound_value: f64::NAN,
        margin: f64::NAN,
        tolerance: f64::NAN,
        allowance: 0.0,
        lambda_min: f64::NAN,
        lambda_max: f64::NAN,
        verdict: Verdict::Inapplicable,
        calibration: req.bound.is_calibrated().then_some(req.calib),
        cells: traj.grid.cells(),
        eps_reg: traj.eps_reg,
        mask_threshold: req.mask_threshold,
        masked_nodes: mask.count(),
        slack: None,
        note: String::new(),
        series: Vec::new(),
    };
    let (lmin, lmax) = match lambda_bounds(fields, &mask) {
        Ok(b) => b,
        Err(e) => {
            report.note = e.to_string();
            return Ok(report);
        }
    };
    report.lambda_min = lmin;
    report.lambda_max = lmax;
    let sups = sup_f_series(traj, fields, &mask, req.alpha)?;
    let coarse_sups = match coarse {
        Some((ct, cf)) => {
            if ct.times != traj.times {
                return Err(LabError::param("coarse", "coarse trajectory must share snapshot times"));
            }
            let cmask = cylinder_mask(ct, &req.cylinder, req.mask_threshold);
            Some(sup_f_series(ct, cf, &cmask, req.alpha)?)
        }
        None => None,
    };
    let kcurv = traj.manifold.ricci_lower_bound();
    let n = traj.params.n;
    let evaluate = |t: f64| -> Result<(f64, Option<FastSlack>)> {
        let p = &traj.params;
        Ok(match req.bound {
            BoundName::SlowGlobal => (slow_global_bound(&p.slow_constants(req.alpha)?, t, kcurv, lmax), None),
            BoundName::SlowBall => (
                slow_ball_bound(
                    &p.slow_constants(req.alpha)?,
                    t,
                    kcurv,
                    traj.grid.radius(),
                    lmin,
                    lmax,
                    &req.calib,
                ),
                None,
            ),
            BoundName::FastGlobal => {
                let opt = optimize_eps(p, req.alpha, t, kcurv, lmax)?;
                (opt.bound, Some(opt.slack))
            }
            BoundName::FastGlobalDefault => {
                let fc = p.fast_constants_default(req.alpha)?;
                (fast_global_bound(&fc, t, kcurv, lmax)?, Some(fc.slack))
            }
            BoundName::LiYau => (
                reference_bound(ReferenceBound::LiYau {
                    n,
                    alpha: req.alpha,
                    t,
                    curvature_bound: kcurv,
                    radius: traj.grid.radius(),
                    calib_c: req.calib.c,
                })?,
                None,
            ),
            BoundName::LiYauGlobal => (
                reference_bound(ReferenceBound::LiYauGlobal {
                    n,
                    alpha: req.alpha,
                    t,
                    curvature_bound: kcurv,
                })?,
                None,
            ),
            BoundName::ClosedRes => (
                reference_bound(ReferenceBound::ClosedRes {
                    n,
                    alpha: req.alpha,
                    t,
                    p: p.p,
                    delta: p.delta(),
                    curvature_bound: kcurv,
                    lambda_max: lmax,
                })?,
                None,
            ),
            BoundName::VazGlobal => (
                reference_bound(ReferenceBound::VazGlobal {
                    n,
                    alpha: req.alpha,
                    t,
                    delta: p.delta(),
                    curvature_bound: kcurv,
                    lambda_max: lmax,
                })?,
                None,
            ),
        })
    };
    let mut worst: Option<(usize, f64, Option<FastSlack>, f64)> = None;
    let mut all_ok = true;
    for (k, sup) in sups.iter().enumerate() {
        let Some(sup) = *sup else { continue };
        let t = traj.times[k];
        let (bound, slack) = evaluate(t)?;
        let allowance = coarse_sups
            .as_ref()
            .and_then(|c| c[k])
            .map(|c| (sup - c).abs())
            .unwrap_or(0.0);
        let tolerance = CERT_REL_TOL * bound.abs() + allowance;
        let margin = bound - sup;
        all_ok &= margin >= -tolerance;
        report.series.push(CertificatePoint {
            t,
            sup_f: sup,
            bound,
            margin,
            tolerance,
        });
        if worst.map_or(true, |w| margin < w.1) {
            worst = Some((k, margin, slack, allowance));
        }
    }
    let Some((k, margin, slack, allowance)) = worst else {
        report.note = "no snapshot inside the cylinder".into();
        return Ok(report);
    };
    let point = report.series.iter().find(|p| p.t == traj.times[k]).copied().unwrap();
    report.t_star = point.t;
    report.measured_sup_f = point.sup_f;
    report.bound_value = point.bound;
    report.margin = margin;
    report.tolerance = point.tolerance;
    report.allowance = allowance;
    report.slack = slack;
    report.verdict = if all_ok { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}
