//! Closed-form Euclidean solutions: the self-similar source solution of the
//! slow regime and the Gaussian heat kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::unit_sphere_area;
use crate::params::{DiffusionParams, Regime};
use crate::quadrature;

/// Relative PDE residual that calibration must reach.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

/// `u(r,t) = t^{-nλ} (C - b (r t^{-λ})^{p/(p-1)})_+^{(p-1)/δ}` on `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattProfile {
    pub params: DiffusionParams,
    pub lambda_exp: f64,
    pub c_prof: f64,
    pub b_prof: f64,
    pub mass: f64,
    /// Relative residual reached during calibration.
    pub residual: f64,
}

impl BarenblattProfile {
    fn conj(&self) -> f64 {
        self.params.p / (self.params.p - 1.0)
    }

    fn outer_power(&self) -> f64 {
        (self.params.p - 1.0) / self.params.delta()
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c_prof / self.b_prof).powf(1.0 / self.conj()) * t.powf(self.lambda_exp)
    }

    /// `C - b ξ^{p'}` with `ξ = r t^{-λ}`; negative outside the support.
    fn base(&self, r: f64, t: f64) -> f64 {
        let xi = r * t.powf(-self.lambda_exp);
        self.c_prof - self.b_prof * xi.powf(self.conj())
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let base = self.base(r.abs(), t);
        if base <= 0.0 {
            return 0.0;
        }
        t.powf(-(self.params.n as f64) * self.lambda_exp) * base.powf(self.outer_power())
    }

    /// Pressure `v` and its derivatives `(v, v_r, v_t)` from the closed form.
    /// Only meaningful inside the support.
    pub fn pressure_jet(&self, r: f64, t: f64) -> (f64, f64, f64) {
        let p = self.params.p;
        let d = self.params.delta();
        let kappa = self.params.q * (p - 1.0) / d;
        let gamma = self.params.n as f64 * self.lambda_exp * d / (p - 1.0);
        let pc = self.conj();
        let l = self.lambda_exp;
        let tg = t.powf(-gamma);
        let tl = t.powf(-l * pc);
        let rp = r.powf(pc);
        let v = kappa * tg * (self.c_prof - self.b_prof * rp * tl);
        let vr = -kappa * tg * self.b_prof * pc * r.powf(pc - 1.0) * tl;
        let vt = kappa
            * (-gamma * tg / t * (self.c_prof - self.b_prof * rp * tl)
                + tg * self.b_prof * rp * l * pc * tl / t);
        (v, vr, vt)
    }

    /// Closed-form `(y, z) = (|v_r|^p / v, v_t / v)`.
    pub fn yz(&self, r: f64, t: f64) -> (f64, f64) {
        let (v, vr, vt) = self.pressure_jet(r, t);
        (vr.abs().powf(self.params.p) / v, vt / v)
    }

    /// Total mass `∫ u dx` at time `t`, by quadrature over the support.
    pub fn mass_at(&self, t: f64) -> f64 {
        let n = self.params.n;
        let rs = self.support_radius(t);
        unit_sphere_area(n)
            * quadrature::integrate(|r| self.eval(r, t) * r.powi(n as i32 - 1), 0.0, rs, 1e-13)
    }
}

/// `∫_0^1 (1 - s^{p'})^k s^{n-1} ds`.
fn shape_integral(conj: f64, k: f64, n: usize) -> f64 {
    quadrature::integrate(
        |s| (1.0 - s.powf(conj)).max(0.0).powf(k) * s.powi(n as i32 - 1),
        0.0,
        1.0,
        1e-14,
    )
}

/// Calibrates the self-similar profile for the given total mass.
///
/// The profile coefficient is found by minimizing the discrete residual
/// `∂_t u - Δ_p u^q` of the closed form on a sample grid; the profile constant
/// then follows from the mass.
pub fn calibrate_profile(params: DiffusionParams, mass: f64) -> Result<BarenblattProfile> {
    if params.regime() != Regime::Slow {
        return Err(LabError::WrongRegime {
            expected: "slow",
            found: params.regime(),
        });
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(LabError::param("mass", format!("must be positive, got {mass}")));
    }
    let n = params.n as f64;
    let lambda_exp = 1.0 / (n * params.delta() + params.p);
    let trial = |b: f64| BarenblattProfile {
        params,
        lambda_exp,
        c_prof: 1.0,
        b_prof: b,
        mass,
        residual: f64::NAN,
    };

    // Golden-section search on log b; the residual is unimodal in b.
    let objective = |lb: f64| residual_norm(&trial(lb.exp()));
    let (mut lo, mut hi) = (-30.0f64, 10.0f64);
    // Coarse scan to bracket the minimum.
    let scan: Vec<(f64, f64)> = (0..=80)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 80.0;
            (x, objective(x))
        })
        .collect();
    let best = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    lo = scan[best.saturating_sub(1)].0;
    hi = scan[(best + 1).min(scan.len() - 1)].0;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = objective(x2);
        }
    }
    let b = (0.5 * (lo + hi)).exp();
    let residual = residual_norm(&trial(b));
    if !(residual <= CALIBRATION_TOLERANCE) {
        return Err(LabError::Calibration(format!(
            "minimum residual {residual:e} exceeds {CALIBRATION_TOLERANCE:e} at b = {b}"
        )));
    }

    // M = ω (C/b)^{n/p'} C^k I
    let p = params.p;
    let conj = p / (p - 1.0);
    let k = (p - 1.0) / params.delta();
    let shape = shape_integral(conj, k, params.n);
    let omega = unit_sphere_area(params.n);
    let c_power = n / conj + k;
    let c_prof = (mass / (omega * shape * b.powf(-n / conj))).powf(1.0 / c_power);
    Ok(BarenblattProfile {
        params,
        lambda_exp,
        c_prof,
        b_prof: b,
        mass,
        residual,
    })
}

/// Maximum of `|∂_t u - Δ_p u^q|` over samples in `[0.1, 0.9]` of the support
/// at `t = 1`, relative to the maximum of `|∂_t u|`.
pub fn residual_norm(profile: &BarenblattProfile) -> f64 {
    let t = 1.0;
    let rs = profile.support_radius(t);
    if !rs.is_finite() || rs <= 0.0 {
        return f64::INFINITY;
    }
    let samples = 64;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..samples {
        let r = rs * (0.1 + 0.8 * i as f64 / (samples - 1) as f64);
        let (ut, lap) = residual_terms(profile, r, t, 1e-3 * rs);
        worst = worst.max((ut - lap).abs());
        scale = scale.max(ut.abs()).max(lap.abs());
    }
    if scale == 0.0 || !worst.is_finite() {
        f64::INFINITY
    } else {
        worst / scale
    }
}

/// `(∂_t u, Δ_p u^q)` by fourth-order central differences with spatial step `h`.
pub fn residual_terms(profile: &BarenblattProfile, r: f64, t: f64, h: f64) -> (f64, f64) {
    let p = profile.params.p;
    let q = profile.params.q;
    let n = profile.params.n as i32;
    let d1 = |f: &dyn Fn(f64) -> f64, x: f64, s: f64| {
        (f(x - 2.0 * s) - 8.0 * f(x - s) + 8.0 * f(x + s) - f(x + 2.0 * s)) / (12.0 * s)
    };
    let w = |x: f64| profile.eval(x, t).powf(q);
    let flux = |x: f64| {
        let g = d1(&w, x, h);
        x.powi(n - 1) * g.abs().powf(p - 2.0) * g
    };
    let lap = d1(&flux, r, h) / r.powi(n - 1);
    let ht = 1e-3 * t;
    let ut = d1(&|s: f64| profile.eval(r, s), t, ht);
    (ut, lap)
}

/// Gaussian heat kernel on `R^n`.
pub fn heat_kernel_eval(n: usize, r: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-(n as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

/// `(∂_r log u, ∂_t log u)` for the heat kernel.
pub fn heat_kernel_log_derivatives(n: usize, r: f64, t: f64) -> (f64, f64) {
    (-r / (2.0 * t), -(n as f64) / (2.0 * t) + r * r / (4.0 * t * t))
}

/// `|∇u|²/u² - α ∂_t u/u` for the heat kernel, from closed-form derivatives.
pub fn heat_kernel_harnack(n: usize, r: f64, t: f64, alpha: f64) -> f64 {
    let (g, lt) = heat_kernel_log_derivatives(n, r, t);
    g * g - alpha * lt
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn classical_one_dimensional_profile() {
        let params = DiffusionParams::new(2.0, 2.0, 1).unwrap();
        let prof = calibrate_profile(params, 1.0).unwrap();
        assert!(rel(prof.lambda_exp, 1.0 / 3.0) < 1e-15);
        // hand-derived porous-medium coefficients
        assert!(rel(prof.b_prof, 1.0 / 12.0) < 1e-6, "b = {}", prof.b_prof);
        let c = (3.0 / (4.0 * 12f64.sqrt())).powf(2.0 / 3.0);
        assert!(rel(prof.c_prof, c) < 1e-6, "C = {}", prof.c_prof);
    }

    #[test]
    fn residual_vanishes_on_sample_grid() {
        let params = DiffusionParams::new(2.0, 2.0, 1).unwrap();
        let prof = calibrate_profile(params, 1.0).unwrap();
        assert!(prof.residual <= CALIBRATION_TOLERANCE);
        let rs = prof.support_radius(2.0);
        for i in 1..10 {
            let r = rs * i as f64 / 11.0;
            let (ut, lap) = residual_terms(&prof, r, 2.0, 1e-3 * rs);
            assert!((ut - lap).abs() <= 1e-6 * ut.abs().max(lap.abs()).max(1e-3));
        }
    }

    #[test]
    fn mass_is_conserved() {
        for &(p, q, n) in &[(2.0, 2.0, 3), (3.0, 1.0, 2), (2.0, 2.0, 1)] {
            let prof = calibrate_profile(DiffusionParams::new(p, q, n).unwrap(), 1.0).unwrap();
            for &t in &[1.0, 2.0, 4.0] {
                assert!(rel(prof.mass_at(t), 1.0) < 1e-8, "p={p} n={n} t={t}");
            }
        }
    }

    #[test]
    fn doubling_mass_keeps_coefficient() {
        let params = DiffusionParams::new(3.0, 1.0, 2).unwrap();
        let a = calibrate_profile(params, 1.0).unwrap();
        let b = calibrate_profile(params, 2.0).unwrap();
        assert!(rel(a.b_prof, b.b_prof) < 1e-9);
        assert!(b.c_prof > a.c_prof);
    }

    #[test]
    fn rejects_non_slow() {
        let params = DiffusionParams::new(2.0, 0.5, 2).unwrap();
        assert!(calibrate_profile(params, 1.0).is_err());
    }

    #[test]
    fn support_and_compactness() {
        let prof = calibrate_profile(DiffusionParams::new(2.0, 2.0, 3).unwrap(), 1.0).unwrap();
        let r1 = prof.support_radius(1.0);
        let r2 = prof.support_radius(2.0);
        assert!(rel(r2 / r1, 2f64.powf(prof.lambda_exp)) < 1e-14);
        assert_eq!(prof.eval(1.01 * r1, 1.0), 0.0);
        assert!(prof.eval(0.5 * r1, 1.0) > 0.0);
    }

    #[test]
    fn closed_form_yz_match_differences() {
        let prof = calibrate_profile(DiffusionParams::new(3.0, 1.0, 2).unwrap(), 1.0).unwrap();
        let params = prof.params;
        let r = 0.4 * prof.support_radius(1.5);
        let t = 1.5;
        let v = |r: f64, t: f64| params.pressure(prof.eval(r, t)).unwrap();
        let h = 1e-5;
        let vr = (v(r + h, t) - v(r - h, t)) / (2.0 * h);
        let vt = (v(r, t + h) - v(r, t - h)) / (2.0 * h);
        let (v0, jr, jt) = prof.pressure_jet(r, t);
        assert!(rel(v0, v(r, t)) < 1e-12);
        assert!(rel(jr, vr) < 1e-7);
        assert!(rel(jt, vt) < 1e-7);
    }

    #[test]
    fn heat_kernel_examples() {
        let t = 1.0 / (4.0 * PI);
        assert!((heat_kernel_eval(2, 0.0, t) - 1.0).abs() < 1e-15);
        for n in 1..=4 {
            for &t in &[0.3, 1.0, 7.0] {
                for &r in &[0.0, 0.5, 2.0, 5.0] {
                    let h = heat_kernel_harnack(n, r, t, 1.0);
                    assert!((h - n as f64 / (2.0 * t)).abs() <= 1e-10 * (n as f64 / (2.0 * t)));
                }
                let m = unit_sphere_area(n)
                    * quadrature::integrate(
                        |r| heat_kernel_eval(n, r, t) * r.powi(n as i32 - 1),
                        0.0,
                        40.0 * t.sqrt(),
                        1e-13,
                    );
                assert!((m - 1.0).abs() < 1e-10, "n={n} t={t} m={m}");
            }
        }
    }
}
