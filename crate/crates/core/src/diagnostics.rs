//! Numerical checks of the intermediate inequalities behind the estimates:
//! the pointwise Bochner-type inequality, the Caccioppoli-type energy
//! inequality, Sobolev constants, the shrinking-cylinder schedule and the
//! nonlinear recursion lemma.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::certify::{check_alpha, cylinder_mask, f_alpha, CylinderMask, CylinderSpec, DEFAULT_MASK_THRESHOLD};
use crate::certify::Calibration;
use crate::error::{LabError, Result};
use crate::geometry::{unit_sphere_area, ModelManifold};
use crate::params::Regime;
use crate::phi::{PhiFast, PhiSlow};
use crate::quadrature;
use crate::solver::{radial_derivative, time_derivative, DerivedFields, RadialTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckVerdict::Pass => "pass",
            CheckVerdict::Fail => "fail",
            CheckVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// `F_α` on every node of every snapshot.
fn f_alpha_field(regime: Regime, alpha: f64, fields: &DerivedFields) -> Vec<Vec<f64>> {
    fields
        .y
        .iter()
        .zip(&fields.z)
        .map(|(y, z)| y.iter().zip(z).map(|(&y, &z)| f_alpha(regime, alpha, y, z)).collect())
        .collect()
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

// ---------------------------------------------------------------------------
// Bochner-type pointwise inequality

/// Relative tolerance of the pointwise check.
pub const BOCHNER_REL_TOL: f64 = 1e-4;
/// Extra spatial erosion: the operator differentiates `F_α` twice.
const BOCHNER_REACH: usize = 4;
/// Snapshots kept away from either end, so that `∂_t F_α` only sees
/// centered time differences.
const BOCHNER_TIME_REACH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BochnerSample {
    pub r: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BochnerReport {
    pub samples: Vec<BochnerSample>,
    /// Median of `y²` over the masked cylinder.
    pub scale: f64,
    /// Smallest `slack / tolerance`.
    pub worst_ratio: f64,
    pub pass: bool,
}

fn bochner_admissible(mask: &CylinderMask, k: usize, i: usize) -> bool {
    let ks = mask.mask.len();
    let m = mask.mask[0].len();
    if k < BOCHNER_TIME_REACH || k + BOCHNER_TIME_REACH >= ks || i < BOCHNER_REACH || i + BOCHNER_REACH >= m {
        return false;
    }
    (k - BOCHNER_TIME_REACH + 1..=k + BOCHNER_TIME_REACH - 1).all(|kk| (i - BOCHNER_REACH..=i + BOCHNER_REACH).all(|ii| mask.mask[kk][ii]))
}

/// Interior sample points `(snapshot, node)` with `r ≥ r_min`, every
/// `stride`-th admissible node. `F_α` degenerates at the edge of the support,
/// so the mask should use a stricter threshold than the certifier's.
pub fn bochner_points(traj: &RadialTrajectory, mask: &CylinderMask, r_min: f64, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let mut points = Vec::new();
    for k in 0..traj.times.len() {
        let mut count = 0;
        for i in 0..traj.grid.cells() {
            if traj.grid.node(i) >= r_min && bochner_admissible(mask, k, i) {
                if count % stride == 0 {
                    points.push((k, i));
                }
                count += 1;
            }
        }
    }
    points
}

/// Evaluates both sides of the differential inequality for `F_α` at the given
/// points; `slack = rhs - lhs`.
pub fn bochner_residual(
    traj: &RadialTrajectory,
    fields: &DerivedFields,
    alpha: f64,
    mask: &CylinderMask,
    points: &[(usize, usize)],
) -> Result<BochnerReport> {
    let params = traj.params;
    let regime = params.regime();
    if !matches!(regime, Regime::Slow | Regime::Fast) {
        return Err(LabError::WrongRegime {
            expected: "slow or fast",
            found: regime,
        });
    }
    check_alpha(regime, alpha)?;
    let p = params.p;
    let kcurv = traj.manifold.ricci_lower_bound();
    // (diffusion coefficient, sign of the drift term, β, c_n, z² coefficient, curvature coefficient)
    let (coef, sign, beta, cn, zcoef, ccurv) = match regime {
        Regime::Slow => {
            let c = params.slow_constants(alpha)?;
            (c.delta / (p - 1.0), 1.0, c.beta, c.cn, (p - 1.0) * (alpha - 1.0), c.cdelta)
        }
        _ => {
            let c = params.fast_constants_default(alpha)?;
            (c.gap / (p - 1.0), -1.0, c.beta, c.cn, (p - 1.0) * (1.0 - alpha), c.c_gap)
        }
    };
    let h = traj.grid.spacing();
    let big_f = f_alpha_field(regime, alpha, fields);
    let f_t = time_derivative(&traj.times, &big_f);
    let scale = median(
        mask.mask
            .iter()
            .enumerate()
            .flat_map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &on)| on)
                    .map(move |(i, _)| fields.y[k][i].powi(2))
            })
            .collect(),
    );
    let mut samples = Vec::with_capacity(points.len());
    let mut cache: Option<(usize, Vec<f64>, Vec<f64>)> = None;
    for &(k, i) in points {
        if k >= traj.times.len() || i >= traj.grid.cells() || !bochner_admissible(mask, k, i) {
            return Err(LabError::Hypothesis(format!(
                "sample (snapshot {k}, node {i}) lies outside the masked interior"
            )));
        }
        if cache.as_ref().map_or(true, |c| c.0 != k) {
            let f_r = radial_derivative(&big_f[k], h);
            let flux: Vec<f64> = fields.dvdr[k]
                .iter()
                .zip(&f_r)
                .map(|(&g, &fr)| g.abs().powf(p - 2.0) * fr)
                .collect();
            let flux_r = radial_derivative(&flux, h);
            let _ = flux;
            cache = Some((k, f_r, flux_r));
        }
        let (_, f_r, flux_r) = cache.as_ref().unwrap();
        let r = traj.grid.node(i);
        let (v, g, y, z) = (fields.v[k][i], fields.dvdr[k][i], fields.y[k][i], fields.z[k][i]);
        let weight = g.abs().powf(p - 2.0);
        let drift = traj.manifold.drift_at(r);
        let op = (p - 1.0) * (flux_r[i] + drift * weight * f_r[i]);
        let lhs = f_t[k][i] - coef * v * op;
        let mixed = match regime {
            Regime::Slow => y - z,
            _ => y + z,
        };
        let rhs = sign * beta * weight * g * f_r[i] - cn * mixed * mixed - zcoef * z * z
            + ccurv * kcurv * g.abs().powf(2.0 * (p - 1.0));
        let tolerance = BOCHNER_REL_TOL * (lhs.abs() + rhs.abs() + scale);
        samples.push(BochnerSample {
            r,
            t: traj.times[k],
            lhs,
            rhs,
            slack: rhs - lhs,
            tolerance,
        });
    }
    let worst_ratio = samples
        .iter()
        .map(|s| s.slack / s.tolerance)
        .fold(f64::INFINITY, f64::min);
    Ok(BochnerReport {
        pass: !samples.is_empty() && samples.iter().all(|s| s.slack >= -s.tolerance),
        samples,
        scale,
        worst_ratio,
    })
}

// ---------------------------------------------------------------------------
// Caccioppoli-type energy inequality

/// Product cutoff `η(r, t) = η₁(r) η₂(t)`: `η₁` is 1 up to `r_inner` and
/// falls linearly to 0 at `r_outer`; `η₂` rises linearly from 0 at `t_start`
/// to 1 at `t_ramp_end` and stays 1 until `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffPair {
    pub r_inner: f64,
    pub r_outer: f64,
    pub t_start: f64,
    pub t_ramp_end: f64,
    pub t_end: f64,
}

impl CutoffPair {
    pub fn new(r_inner: f64, r_outer: f64, t_start: f64, t_ramp_end: f64, t_end: f64) -> Result<Self> {
        if !(r_inner >= 0.0 && r_outer > r_inner) {
            return Err(LabError::param("r_outer", format!("need 0 <= r_inner < r_outer, got {r_inner}, {r_outer}")));
        }
        if !(t_start >= 0.0 && t_ramp_end > t_start && t_end >= t_ramp_end) {
            return Err(LabError::param(
                "t_ramp_end",
                format!("need t_start < t_ramp_end <= t_end, got {t_start}, {t_ramp_end}, {t_end}"),
            ));
        }
        Ok(Self {
            r_inner,
            r_outer,
            t_start,
            t_ramp_end,
            t_end,
        })
    }

    pub fn spatial(&self, r: f64) -> f64 {
        if r <= self.r_inner {
            1.0
        } else if r >= self.r_outer {
            0.0
        } else {
            (self.r_outer - r) / (self.r_outer - self.r_inner)
        }
    }

    pub fn spatial_slope(&self, r: f64) -> f64 {
        if r > self.r_inner && r < self.r_outer {
            -1.0 / (self.r_outer - self.r_inner)
        } else {
            0.0
        }
    }

    pub fn temporal(&self, t: f64) -> f64 {
        ((t - self.t_start) / (self.t_ramp_end - self.t_start)).clamp(0.0, 1.0)
    }

    pub fn temporal_slope(&self, t: f64) -> f64 {
        if t >= self.t_start && t < self.t_ramp_end {
            1.0 / (self.t_ramp_end - self.t_start)
        } else {
            0.0
        }
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.spatial(r) * self.temporal(t)
    }
}

/// Relative tolerance of the energy comparison.
pub const CACCIOPPOLI_SLACK: f64 = 0.05;
/// Largest accepted disagreement between the full and half-resolution quadratures.
pub const QUADRATURE_AGREEMENT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_coarse: f64,
    pub rhs_coarse: f64,
    /// Relative difference between full and half-resolution quadratures.
    pub disagreement: f64,
    /// Normalization: every term is divided by `f_max^λ`.
    pub f_max: f64,
    pub lambda_max: f64,
    pub verdict: CheckVerdict,
}

/// Pointwise integrands of the energy inequality, already divided by `f_max^λ`.
struct EnergyTerms {
    /// `f^λ η²`
    mass: Vec<Vec<f64>>,
    /// `|∇(f^{λ/2} η)|² Λ`
    gradient: Vec<Vec<f64>>,
    /// `f^{λ+1} η²`
    absorption: Vec<Vec<f64>>,
    /// `(η ∂_t η + |∇η|² Λ) f^λ`
    cutoff: Vec<Vec<f64>>,
}

/// Compares both sides of the energy inequality for `f = (F_α - φ)_+` with
/// the cutoff `η`. `lambda = None` picks the smallest admissible integer.
pub fn caccioppoli_check(
    traj: &RadialTrajectory,
    fields: &DerivedFields,
    cutoff: &CutoffPair,
    lambda: Option<f64>,
    alpha: f64,
) -> Result<CaccioppoliReport> {
    let params = traj.params;
    let regime = params.regime();
    check_alpha(regime, alpha)?;
    let kcurv = traj.manifold.ricci_lower_bound();

    // snapshots covering [t_start, t_end], which must both be stored
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let ks: Vec<usize> = (0..traj.times.len())
        .filter(|&k| traj.times[k] >= cutoff.t_start - 1e-12 && traj.times[k] <= cutoff.t_end + 1e-12)
        .collect();
    if ks.len() < 3 || !close(traj.times[ks[0]], cutoff.t_start) || !close(traj.times[*ks.last().unwrap()], cutoff.t_end) {
        return Err(LabError::param(
            "cutoff",
            "t_start and t_end must be stored snapshot times with at least one snapshot between them",
        ));
    }
    let h = traj.grid.spacing();
    let is: Vec<usize> = (0..traj.grid.cells())
        .filter(|&i| traj.grid.node(i) < cutoff.r_outer)
        .collect();
    if is.is_empty() || is.len() + 2 >= traj.grid.cells() {
        return Err(LabError::param("cutoff", "r_outer must leave room for the derivative stencil inside the grid"));
    }
    let cyl = CylinderSpec::new(1.0, cutoff.t_start.max(f64::MIN_POSITIVE), cutoff.t_end)?;
    let mask = cylinder_mask(traj, &cyl, DEFAULT_MASK_THRESHOLD);
    let reach = is.len() + 2;
    for &k in &ks {
        if let Some(i) = (0..reach).find(|&i| !mask.mask[k][i]) {
            return Err(LabError::Hypothesis(format!(
                "cutoff support reaches the masked-out region at r = {}, t = {}",
                traj.grid.node(i),
                traj.times[k]
            )));
        }
    }

    let lambda_max = ks
        .iter()
        .flat_map(|&k| (0..reach).map(move |i| fields.lambda[k][i]))
        .fold(f64::NEG_INFINITY, f64::max);
    // (φ, gradient coefficient, absorption coefficient, right-hand constant, admissible λ)
    let (phi, c3, absorb, big_c1, lambda_floor): (Box<dyn Fn(f64) -> f64>, f64, f64, f64, f64) = match regime {
        Regime::Slow => {
            let c = params.slow_constants(alpha)?;
            let (big_a, a, b) = c.phi_parameters(kcurv, lambda_max);
            let phi = PhiSlow::build(big_a, a, b)?;
            (Box::new(move |t| phi.value(t)), c.c3, c.c1, c.big_c1, c.lambda_min_admissible)
        }
        Regime::Fast => {
            let c = params.fast_constants_default(alpha)?;
            let (a, b) = c.phi_coefficients(kcurv, lambda_max);
            let phi = PhiFast::build(a, b, 1.0)?;
            (
                Box::new(move |t| phi.value(t)),
                c.c3,
                c.slack.eps3,
                c.big_c1,
                c.lambda_min_admissible(),
            )
        }
        _ => {
            return Err(LabError::WrongRegime {
                expected: "slow or fast",
                found: regime,
            })
        }
    };
    let lambda = lambda.unwrap_or(lambda_floor.ceil());
    if !(lambda >= lambda_floor) {
        return Err(LabError::param(
            "lambda",
            format!("{lambda} is below the admissible exponent {lambda_floor}"),
        ));
    }

    let big_f = f_alpha_field(regime, alpha, fields);
    let f: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let shift = phi(traj.times[k]);
            is.iter().map(|&i| (big_f[k][i] - shift).max(0.0)).collect()
        })
        .collect();
    let f_max = f.iter().flatten().cloned().fold(0.0, f64::max);
    if f_max == 0.0 {
        return Ok(CaccioppoliReport {
            lambda,
            lhs: 0.0,
            rhs: 0.0,
            lhs_coarse: 0.0,
            rhs_coarse: 0.0,
            disagreement: 0.0,
            f_max,
            lambda_max,
            verdict: CheckVerdict::Pass,
        });
    }

    let mut terms = EnergyTerms {
        mass: Vec::new(),
        gradient: Vec::new(),
        absorption: Vec::new(),
        cutoff: Vec::new(),
    };
    for (row, &k) in ks.iter().enumerate() {
        let t = traj.times[k];
        let f_r = radial_derivative(&big_f[k], h);
        let (e2, e2t) = (cutoff.temporal(t), cutoff.temporal_slope(t));
        let mut mass = Vec::with_capacity(is.len());
        let mut gradient = Vec::with_capacity(is.len());
        let mut absorption = Vec::with_capacity(is.len());
        let mut cut = Vec::with_capacity(is.len());
        for (col, &i) in is.iter().enumerate() {
            let r = traj.grid.node(i);
            let ft = f[row][col] / f_max;
            let (e1, e1r) = (cutoff.spatial(r), cutoff.spatial_slope(r));
            let eta = e1 * e2;
            let eta_r = e1r * e2;
            let eta_t = e1 * e2t;
            let lam = fields.lambda[k][i];
            let pow = ft.powf(lambda);
            let grad = if ft > 0.0 {
                0.5 * lambda * ft.powf(0.5 * lambda - 1.0) * (f_r[i] / f_max) * eta + ft.powf(0.5 * lambda) * eta_r
            } else {
                0.0
            };
            mass.push(pow * eta * eta);
            gradient.push(grad * grad * lam);
            absorption.push(pow * ft * eta * eta);
            cut.push((eta * eta_t + eta_r * eta_r * lam) * pow);
        }
        terms.mass.push(mass);
        terms.gradient.push(gradient);
        terms.absorption.push(absorption);
        terms.cutoff.push(cut);
    }

    let omega = unit_sphere_area(traj.manifold.dimension());
    let radii: Vec<f64> = is.iter().map(|&i| traj.grid.node(i)).collect();
    let density: Vec<f64> = radii.iter().map(|&r| omega * traj.manifold.area_density(r)).collect();
    let times: Vec<f64> = ks.iter().map(|&k| traj.times[k]).collect();
    let sides = |cols: &[usize], rows: &[usize]| -> (f64, f64) {
        let space = |vals: &[f64]| -> f64 {
            let xs: Vec<f64> = cols.iter().map(|&c| radii[c]).collect();
            let ys: Vec<f64> = cols.iter().map(|&c| vals[c] * density[c]).collect();
            // constant extension over [0, first node]
            ys[0] * xs[0] + quadrature::trapezoid(&xs, &ys)
        };
        let spacetime = |field: &[Vec<f64>]| -> f64 {
            let ts: Vec<f64> = rows.iter().map(|&r| times[r]).collect();
            let vals: Vec<f64> = rows.iter().map(|&r| space(&field[r])).collect();
            quadrature::trapezoid(&ts, &vals)
        };
        let last = *rows.last().unwrap();
        let boundary = space(&terms.mass[last]) - space(&terms.mass[rows[0]]);
        let lhs = boundary + c3 * spacetime(&terms.gradient) + lambda * absorb * f_max * spacetime(&terms.absorption);
        let rhs = big_c1 * spacetime(&terms.cutoff);
        (lhs, rhs)
    };
    let every = |len: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..len).collect();
        v.dedup();
        v
    };
    let every_other = |len: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..len).step_by(2).collect();
        if *v.last().unwrap() != len - 1 {
            v.push(len - 1);
        }
        v
    };
    let (lhs, rhs) = sides(&every(is.len()), &every(ks.len()));
    let (lhs_coarse, rhs_coarse) = sides(&every_other(is.len()), &every_other(ks.len()));
    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    };
    let disagreement = rel(lhs, lhs_coarse).max(rel(rhs, rhs_coarse));
    let verdict = if disagreement > QUADRATURE_AGREEMENT {
        CheckVerdict::Inconclusive
    } else if lhs <= rhs * (1.0 + CACCIOPPOLI_SLACK) {
        CheckVerdict::Pass
    } else {
        CheckVerdict::Fail
    };
    Ok(CaccioppoliReport {
        lambda,
        lhs,
        rhs,
        lhs_coarse,
        rhs_coarse,
        disagreement,
        f_max,
        lambda_max,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Sobolev constants

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevEstimate {
    pub bound: f64,
    pub kappa: f64,
    pub nu: f64,
    pub ball_volume: f64,
}

/// Sobolev exponent: `n/(n-2)` above dimension two, `low_dim_kappa` otherwise.
pub fn sobolev_exponent(n: usize, low_dim_kappa: f64) -> Result<f64> {
    if n > 2 {
        Ok(n as f64 / (n as f64 - 2.0))
    } else if low_dim_kappa > 1.0 && low_dim_kappa.is_finite() {
        Ok(low_dim_kappa)
    } else {
        Err(LabError::param("kappa", format!("must exceed 1 in dimension {n}, got {low_dim_kappa}")))
    }
}

/// Upper bound `C e^{C_n √K R} R² / μ(B)^ν` for the Sobolev constant of the
/// ball of radius `radius`, with `ν = 1 - 1/κ`.
pub fn sobolev_constant_estimate(
    manifold: &ModelManifold,
    radius: f64,
    calib: &Calibration,
    low_dim_kappa: f64,
) -> Result<SobolevEstimate> {
    let kappa = sobolev_exponent(manifold.dimension(), low_dim_kappa)?;
    let nu = 1.0 - 1.0 / kappa;
    let volume = manifold.ball_volume(radius)?;
    let growth = (calib.c_n * manifold.ricci_lower_bound().sqrt() * radius).exp();
    Ok(SobolevEstimate {
        bound: calib.c * growth * radius * radius / volume.powf(nu),
        kappa,
        nu,
        ball_volume: volume,
    })
}

/// Radial trial functions vanishing at the ball boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialFunction {
    /// `1 - r/R`
    Cone,
    /// `(w² + r²)^{-(n-2)/2} - (w² + R²)^{-(n-2)/2}`, dimension above two.
    Bubble { width: f64 },
    /// `ln((w² + R²)/(w² + r²))`
    LogBubble { width: f64 },
}

impl TrialFunction {
    /// `(w, w_r)` at radius `r` for a ball of radius `radius`.
    fn jet(&self, n: usize, r: f64, radius: f64) -> (f64, f64) {
        match *self {
            TrialFunction::Cone => (1.0 - r / radius, -1.0 / radius),
            TrialFunction::Bubble { width } => {
                let e = 0.5 * (n as f64 - 2.0);
                let w2 = width * width;
                (
                    (w2 + r * r).powf(-e) - (w2 + radius * radius).powf(-e),
                    -2.0 * e * r * (w2 + r * r).powf(-e - 1.0),
                )
            }
            TrialFunction::LogBubble { width } => {
                let w2 = width * width;
                (((w2 + radius * radius) / (w2 + r * r)).ln(), -2.0 * r / (w2 + r * r))
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match *self {
            TrialFunction::Cone => Ok(()),
            TrialFunction::Bubble { width } | TrialFunction::LogBubble { width } if !(width > 0.0) => {
                Err(LabError::param("width", format!("must be positive, got {width}")))
            }
            TrialFunction::Bubble { .. } if n <= 2 => {
                Err(LabError::param("trial", "the power bubble needs dimension above two"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevCheck {
    pub ratios: Vec<(TrialFunction, f64)>,
    pub worst_ratio: f64,
    pub bound: f64,
    /// The measured ratio exceeds the calibrated bound.
    pub calibration_too_small: bool,
}

/// `(∫_B w^{2κ})^{1/κ} / ∫_B |∇w|²` for one trial function.
pub fn sobolev_ratio(manifold: &ModelManifold, radius: f64, kappa: f64, trial: &TrialFunction) -> Result<f64> {
    let n = manifold.dimension();
    trial.validate(n)?;
    if !(radius > 0.0) {
        return Err(LabError::param("radius", "must be positive"));
    }
    let omega = unit_sphere_area(n);
    let top = quadrature::integrate(
        |r| trial.jet(n, r, radius).0.abs().powf(2.0 * kappa) * manifold.area_density(r),
        0.0,
        radius,
        1e-12,
    );
    let bottom = quadrature::integrate(
        |r| trial.jet(n, r, radius).1.powi(2) * manifold.area_density(r),
        0.0,
        radius,
        1e-12,
    );
    Ok((omega * top).powf(1.0 / kappa) / (omega * bottom))
}

pub fn sobolev_empirical_check(
    manifold: &ModelManifold,
    radius: f64,
    kappa: f64,
    trials: &[TrialFunction],
    bound: f64,
) -> Result<SobolevCheck> {
    let ratios = trials
        .iter()
        .map(|t| sobolev_ratio(manifold, radius, kappa, t).map(|r| (*t, r)))
        .collect::<Result<Vec<_>>>()?;
    let worst_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SobolevCheck {
        ratios,
        worst_ratio,
        bound,
        calibration_too_small: worst_ratio > bound,
    })
}

// ---------------------------------------------------------------------------
// Shrinking cylinders

pub const DEFAULT_SCHEDULE_DEPTH: usize = 30;

/// Cylinder `B(r_k) × [t_k, T]` with exponent `λ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderStep {
    pub k: usize,
    /// `1/2 + 2^{-(k+1)}`, exact.
    pub radius_fraction: f64,
    /// `1 - 2^{-k}`, exact.
    pub time_fraction: f64,
    pub radius: f64,
    pub start_time: f64,
    pub exponent: f64,
}

pub fn iteration_schedule(radius: f64, horizon: f64, lambda: f64, nu: f64, depth: usize) -> Result<Vec<CylinderStep>> {
    if !(radius > 0.0 && horizon > 0.0) {
        return Err(LabError::param("radius", "radius and horizon must be positive"));
    }
    if depth > 50 {
        return Err(LabError::param("depth", "dyadic fractions are exact only up to depth 50"));
    }
    Ok((0..=depth)
        .map(|k| {
            let radius_fraction = 0.5 + 0.5f64.powi(k as i32 + 1);
            let time_fraction = 1.0 - 0.5f64.powi(k as i32);
            CylinderStep {
                k,
                radius_fraction,
                time_fraction,
                radius: radius * radius_fraction,
                start_time: horizon * time_fraction,
                exponent: lambda * (1.0 + nu).powi(k as i32),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Nonlinear recursion `J_{k+1} ≤ (A^k/Θ) J_k^{1+ω}`

/// Normalized log-slack below which the bound counts as violated.
pub const JK_TOLERANCE: f64 = 1e-12;
/// Normalized log-slack under which the extremal sequence counts as tight.
pub const JK_TIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JkParams {
    pub a: f64,
    pub theta: f64,
    pub omega: f64,
    pub j0: f64,
}

impl JkParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("A", self.a), ("theta", self.theta), ("omega", self.omega), ("J0", self.j0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `(ln B_k, magnitude of its terms)` for the closed-form bound
    /// `J_k ≤ (J₀/(A^{-1/ω}Θ)^{1/ω})^{(1+ω)^k} (A^{-k-1/ω}Θ)^{1/ω}`.
    pub fn log_bound(&self, k: usize) -> (f64, f64) {
        let (la, lt, w) = (self.a.ln(), self.theta.ln(), self.omega);
        let fixed = (lt - la / w) / w;
        let growth = (1.0 + w).powi(k as i32) * (self.j0.ln() - fixed);
        let drift = la / w * k as f64;
        (growth + fixed - drift, growth.abs() + fixed.abs() + drift.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JkReport {
    pub params: JkParams,
    pub depth: usize,
    /// Smallest normalized log-slack `(ln B_k - ln J_k)/max(1, |terms|)`.
    pub min_log_slack: f64,
    pub worst_k: usize,
    /// Largest normalized log-slack magnitude, for tightness checks.
    pub max_abs_log_slack: f64,
    pub pass: bool,
}

/// Runs `ln J_{k+1} = k ln A - ln Θ + (1+ω) ln J_k + s_k` with `s_k ≤ 0` from
/// `log_shrink` (missing entries count as 0, the extremal case) and compares
/// against the closed-form bound up to `depth`.
pub fn jk_check_sequence(params: &JkParams, depth: usize, log_shrink: &[f64]) -> Result<JkReport> {
    params.validate()?;
    if let Some(s) = log_shrink.iter().find(|&&s| !(s <= 0.0)) {
        return Err(LabError::param("log_shrink", format!("entries must be non-positive, got {s}")));
    }
    let (la, lt, w) = (params.a.ln(), params.theta.ln(), params.omega);
    let mut x = params.j0.ln();
    let mut min_log_slack = f64::INFINITY;
    let mut max_abs = 0.0f64;
    let mut worst_k = 0;
    for k in 0..=depth {
        let (bound, terms) = params.log_bound(k);
        let slack = (bound - x) / terms.max(x.abs()).max(1.0);
        if slack < min_log_slack {
            min_log_slack = slack;
            worst_k = k;
        }
        max_abs = max_abs.max(slack.abs());
        x = k as f64 * la - lt + (1.0 + w) * x + log_shrink.get(k).copied().unwrap_or(0.0);
    }
    Ok(JkReport {
        params: *params,
        depth,
        min_log_slack,
        worst_k,
        max_abs_log_slack: max_abs,
        pass: min_log_slack >= -JK_TOLERANCE,
    })
}

/// Extremal sequence `J_{k+1} = (A^k/Θ) J_k^{1+ω}` against the bound.
pub fn jk_bound_check(params: &JkParams, depth: usize) -> Result<JkReport> {
    jk_check_sequence(params, depth, &[])
}

/// `ln` of the `A = 1` bound `(J₀/Θ^{1/ω})^{(1+ω)^k} Θ^{1/ω}`.
pub fn jk_collapsed_log_bound(theta: f64, omega: f64, j0: f64, k: usize) -> f64 {
    let fixed = theta.ln() / omega;
    (1.0 + omega).powi(k as i32) * (j0.ln() - fixed) + fixed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::calibrate_profile;
    use crate::params::DiffusionParams;
    use crate::solver::RadialGrid;

    #[test]
    fn cutoff_shape() {
        let c = CutoffPair::new(1.0, 2.0, 0.5, 1.0, 3.0).unwrap();
        assert_eq!(c.value(0.5, 2.0), 1.0);
        assert_eq!(c.value(2.5, 2.0), 0.0);
        assert_eq!(c.value(1.5, 0.75), 0.25);
        assert_eq!(c.spatial_slope(1.5), -1.0);
        assert_eq!(c.temporal_slope(0.7), 2.0);
        assert!(CutoffPair::new(2.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sobolev_exponents() {
        let m4 = ModelManifold::euclidean(4).unwrap();
        let est = sobolev_constant_estimate(&m4, 1.0, &Calibration::default(), 2.0).unwrap();
        assert_eq!(est.kappa, 2.0);
        assert_eq!(est.nu, 0.5);
        let m2 = ModelManifold::euclidean(2).unwrap();
        let est = sobolev_constant_estimate(&m2, 1.0, &Calibration::default(), 2.0).unwrap();
        assert_eq!(est.nu, 0.5);
        assert!(sobolev_constant_estimate(&m2, 1.0, &Calibration::default(), 1.0).is_err());
    }

    #[test]
    fn sobolev_scale_invariance_in_flat_space() {
        let m = ModelManifold::euclidean(3).unwrap();
        let cal = Calibration::default();
        let a = sobolev_constant_estimate(&m, 1.0, &cal, 2.0).unwrap().bound;
        let b = sobolev_constant_estimate(&m, 7.0, &cal, 2.0).unwrap().bound;
        assert!((a - b).abs() < 1e-10 * a);
        let r1 = sobolev_ratio(&m, 1.0, 3.0, &TrialFunction::Cone).unwrap();
        let r2 = sobolev_ratio(&m, 5.0, 3.0, &TrialFunction::Cone).unwrap();
        assert!((r1 - r2).abs() < 1e-9 * r1);
    }

    #[test]
    fn cone_ratio_matches_closed_form() {
        // n = 3, κ = 3: ∫(1-r)^6 r² = 2·6!/9! , ∫ r² = 1/3
        let m = ModelManifold::euclidean(3).unwrap();
        let omega = 4.0 * std::f64::consts::PI;
        let top: f64 = omega * 2.0 * 720.0 / 362_880.0;
        let expected = top.powf(1.0 / 3.0) / (omega / 3.0);
        let got = sobolev_ratio(&m, 1.0, 3.0, &TrialFunction::Cone).unwrap();
        assert!((got - expected).abs() < 1e-11 * expected);
    }

    #[test]
    fn schedule_identities() {
        let s = iteration_schedule(1.0, 1.0, 3.0, 0.5, DEFAULT_SCHEDULE_DEPTH).unwrap();
        assert_eq!((s[0].radius, s[0].start_time, s[0].exponent), (1.0, 0.0, 3.0));
        assert_eq!((s[1].radius, s[1].start_time), (0.75, 0.5));
        for w in s.windows(2) {
            let k = w[0].k as i32;
            assert_eq!(w[0].radius - w[1].radius, 0.5f64.powi(k + 2));
            assert_eq!(w[1].start_time - w[0].start_time, 0.5f64.powi(k + 1));
        }
    }

    #[test]
    fn extremal_recursion_is_tight() {
        let p = JkParams {
            a: 3.0,
            theta: 0.2,
            omega: 0.7,
            j0: 1e-3,
        };
        let r = jk_bound_check(&p, 25).unwrap();
        assert!(r.pass);
        assert!(r.max_abs_log_slack < JK_TIGHT, "{r:?}");
        let shrunk = jk_check_sequence(&p, 25, &[-0.5; 25]).unwrap();
        assert!(shrunk.pass);
        assert_eq!(shrunk.worst_k, 0);
    }

    #[test]
    fn collapse_matches() {
        let p = JkParams {
            a: 1.0,
            theta: 5.0,
            omega: 1.5,
            j0: 2.0,
        };
        for k in 0..25 {
            assert_eq!(p.log_bound(k).0, jk_collapsed_log_bound(5.0, 1.5, 2.0, k));
        }
    }

    fn barenblatt(cells: usize, times: Vec<f64>) -> RadialTrajectory {
        let params = DiffusionParams::new(2.0, 2.0, 3).unwrap();
        let prof = calibrate_profile(params, 1.0).unwrap();
        RadialTrajectory::from_exact(
            ModelManifold::euclidean(3).unwrap(),
            params,
            RadialGrid::new(3.0, cells).unwrap(),
            times,
            move |r, t| prof.eval(r, t),
        )
    }

    #[test]
    fn bochner_holds_on_barenblatt() {
        let times: Vec<f64> = (0..11).map(|i| 1.0 + 1e-3 * i as f64).collect();
        let traj = barenblatt(512, times);
        let fields = traj.derived().unwrap();
        let mask = cylinder_mask(&traj, &CylinderSpec::new(1.0, 1.0, 2.0).unwrap(), 0.1);
        let pts = bochner_points(&traj, &mask, 0.1, 7);
        assert!(pts.len() > 50);
        let rep = bochner_residual(&traj, &fields, 2.0, &mask, &pts).unwrap();
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
        assert!(bochner_residual(&traj, &fields, 2.0, &mask, &[(0, 10)]).is_err());
    }

    #[test]
    fn caccioppoli_flat_zero_and_barenblatt() {
        let times: Vec<f64> = (0..=200).map(|i| 1.0 + 5e-4 * i as f64).collect();
        let traj = barenblatt(256, times);
        let fields = traj.derived().unwrap();
        let cut = CutoffPair::new(0.3, 0.6, 1.0, 1.02, 1.1).unwrap();
        let rep = caccioppoli_check(&traj, &fields, &cut, None, 2.0).unwrap();
        assert_eq!(rep.lambda, 217.0);
        assert_eq!(rep.verdict, CheckVerdict::Pass, "{rep:?}");
        assert!(caccioppoli_check(&traj, &fields, &cut, Some(3.0), 2.0).is_err());
    }
}
