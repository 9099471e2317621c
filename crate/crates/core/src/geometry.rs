//! Rotationally symmetric model spaces `dr² + ψ(r)² dθ²`.
//!
//! Two families are supported: Euclidean space (`ψ(r) = r`) and hyperbolic
//! space of sectional curvature `-k` (`ψ(r) = sinh(√k r)/√k`). Both have an
//! exact Ricci lower bound `-(n-1)k`, so a failed certificate on these spaces
//! is never caused by the geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelManifold {
    dimension: usize,
    curvature: f64,
}

impl ModelManifold {
    /// `dimension = 1` is accepted for the Euclidean line (the one-dimensional
    /// Barenblatt validation case); curvature is then irrelevant since
    /// there is no angular part.
    pub fn new(dimension: usize, curvature: f64) -> Result<Self> {
        if dimension < 1 {
            return Err(LabError::param("dimension", "must be at least 1"));
        }
        if !(curvature >= 0.0 && curvature.is_finite()) {
            return Err(LabError::param(
                "curvature",
                format!("must be finite and non-negative, got {curvature}"),
            ));
        }
        Ok(Self {
            dimension,
            curvature,
        })
    }

    pub fn euclidean(dimension: usize) -> Result<Self> {
        Self::new(dimension, 0.0)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// `K` in `Ric ≥ -K`; exact for these spaces.
    pub fn ricci_lower_bound(&self) -> f64 {
        (self.dimension as f64 - 1.0) * self.curvature
    }

    pub fn warping(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.warping_at(r))
    }

    /// Warping function without the positivity check; `warping_at(0) = 0`.
    pub(crate) fn warping_at(&self, r: f64) -> f64 {
        if self.curvature == 0.0 {
            r
        } else {
            let s = self.curvature.sqrt();
            (s * r).sinh() / s
        }
    }

    #[cfg(test)]
    pub(crate) fn warping_derivative_at(&self, r: f64) -> f64 {
        if self.curvature == 0.0 {
            1.0
        } else {
            (self.curvature.sqrt() * r).cosh()
        }
    }

    /// `ψ(r)^{n-1}`, the area density of the geodesic sphere of radius `r`
    /// relative to the unit sphere.
    pub(crate) fn area_density(&self, r: f64) -> f64 {
        self.warping_at(r).powi(self.dimension as i32 - 1)
    }

    /// `(n-1) ψ'(r)/ψ(r)`, the first-order coefficient of the radial Laplacian.
    pub fn drift_coefficient(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.drift_at(r))
    }

    pub(crate) fn drift_at(&self, r: f64) -> f64 {
        let m = self.dimension as f64 - 1.0;
        let k = self.curvature;
        if k == 0.0 {
            return m / r;
        }
        let cutoff = 1e-6 * (1.0 / k.max(1.0)).sqrt();
        if r < cutoff {
            // coth x = 1/x + x/3 - x^3/45 + O(x^5)
            m * (1.0 / r + k * r / 3.0 - k * k * r * r * r / 45.0)
        } else {
            let s = k.sqrt();
            m * s / (s * r).tanh()
        }
    }

    /// Riemannian volume of the geodesic ball of radius `radius`.
    pub fn ball_volume(&self, radius: f64) -> Result<f64> {
        check_radius(radius)?;
        let integral = quadrature::integrate(|r| self.area_density(r), 0.0, radius, 1e-13);
        Ok(unit_sphere_area(self.dimension) * integral)
    }

    /// Volume of the shell `r_lo < r < r_hi` per unit sphere area.
    pub(crate) fn shell_density_integral(&self, r_lo: f64, r_hi: f64) -> f64 {
        if self.curvature == 0.0 {
            let n = self.dimension as i32;
            (r_hi.powi(n) - r_lo.powi(n)) / n as f64
        } else {
            gauss_legendre_5(|r| self.area_density(r), r_lo, r_hi)
        }
    }
}

/// Area of the unit sphere `S^{n-1} ⊂ R^n`; equals 2 for `n = 1`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Γ(n/2)` for positive integers `n`.
fn gamma_half_integer(n: usize) -> f64 {
    let mut value = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

fn gauss_legendre_5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 3] = [0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
    const W: [f64; 3] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = W[0] * f(c);
    for j in 1..3 {
        s += W[j] * (f(c - h * X[j]) + f(c + h * X[j]));
    }
    s * h
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(LabError::param("r", format!("must be positive, got {r}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn warping_examples() {
        let e3 = ModelManifold::new(3, 0.0).unwrap();
        assert_eq!(e3.warping(2.0).unwrap(), 2.0);
        let h2 = ModelManifold::new(2, 1.0).unwrap();
        assert!((h2.warping(1.0).unwrap() - 1.0f64.sinh()).abs() < 1e-15);
        let h2k4 = ModelManifold::new(2, 4.0).unwrap();
        assert!((h2k4.warping(0.5).unwrap() - 0.587_600_596_821_900_7).abs() < 1e-12);
        assert!(e3.warping(0.0).is_err());
        assert!(e3.warping(-1.0).is_err());
    }

    #[test]
    fn warping_normalization_at_origin() {
        for k in [0.0, 0.25, 1.0, 4.0] {
            let m = ModelManifold::new(2, k).unwrap();
            assert_eq!(m.warping_at(0.0), 0.0);
            assert!((m.warping_derivative_at(0.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn drift_examples() {
        let e3 = ModelManifold::new(3, 0.0).unwrap();
        assert_eq!(e3.drift_coefficient(0.5).unwrap(), 4.0);
        let h2 = ModelManifold::new(2, 1.0).unwrap();
        assert!((h2.drift_coefficient(1.0).unwrap() - 1.313_035_285_499_331_3).abs() < 1e-12);
        assert!(h2.drift_coefficient(0.0).is_err());
        let e4 = ModelManifold::new(4, 0.0).unwrap();
        let r = 1e-9;
        assert!(rel(e4.drift_coefficient(r).unwrap(), 3.0 / r) < 1e-15);
    }

    #[test]
    fn drift_series_matches_closed_form_at_cutoff() {
        let m = ModelManifold::new(3, 1.0).unwrap();
        let cutoff = 1e-6;
        let below = m.drift_at(cutoff * (1.0 - 1e-9));
        let above = m.drift_at(cutoff * (1.0 + 1e-9));
        assert!(rel(below, above) < 1e-8);
        // r → 0 limit is (n-1)/r
        let r = 1e-8;
        assert!(rel(m.drift_at(r), 2.0 / r) < 1e-12);
    }

    #[test]
    fn hyperbolic_drift_dominates_euclidean() {
        for &k in &[0.25, 1.0, 4.0] {
            let h = ModelManifold::new(3, k).unwrap();
            let e = ModelManifold::new(3, 0.0).unwrap();
            for i in 1..=1000 {
                let r = i as f64 * 0.01;
                assert!(h.drift_coefficient(r).unwrap() >= e.drift_coefficient(r).unwrap());
            }
        }
    }

    #[test]
    fn ball_volume_examples() {
        let e3 = ModelManifold::new(3, 0.0).unwrap();
        assert!(rel(e3.ball_volume(1.0).unwrap(), 4.0 * PI / 3.0) < 1e-12);
        let e2 = ModelManifold::new(2, 0.0).unwrap();
        assert!(rel(e2.ball_volume(2.0).unwrap(), 4.0 * PI) < 1e-12);
        let h2 = ModelManifold::new(2, 1.0).unwrap();
        let exact = 2.0 * PI * (1.0f64.cosh() - 1.0);
        assert!(rel(h2.ball_volume(1.0).unwrap(), exact) < 1e-10);
        // hyperbolic 3-space: π (sinh 2R − 2R)
        let h3 = ModelManifold::new(3, 1.0).unwrap();
        let exact3 = PI * ((2.0f64 * 1.5).sinh() - 3.0);
        assert!(rel(h3.ball_volume(1.5).unwrap(), exact3) < 1e-10);
    }

    #[test]
    fn ball_volume_monotone_and_dominates() {
        for n in 2..=4 {
            let e = ModelManifold::new(n, 0.0).unwrap();
            let h = ModelManifold::new(n, 1.0).unwrap();
            let mut prev = 0.0;
            for i in 1..=40 {
                let r = 0.1 * i as f64;
                let vh = h.ball_volume(r).unwrap();
                assert!(vh > prev);
                assert!(vh >= e.ball_volume(r).unwrap());
                prev = vh;
            }
        }
    }

    #[test]
    fn ricci_bound_is_linear_in_curvature() {
        let a = ModelManifold::new(4, 0.7).unwrap();
        let b = ModelManifold::new(4, 1.4).unwrap();
        assert_eq!(a.ricci_lower_bound(), 3.0 * 0.7);
        assert!((b.ricci_lower_bound() - 2.0 * a.ricci_lower_bound()).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(unit_sphere_area(1), 2.0);
        assert!(rel(unit_sphere_area(2), 2.0 * PI) < 1e-15);
        assert!(rel(unit_sphere_area(3), 4.0 * PI) < 1e-15);
        assert!(rel(unit_sphere_area(4), 2.0 * PI * PI) < 1e-15);
    }

    #[test]
    fn shell_integral_matches_quadrature() {
        let h = ModelManifold::new(3, 1.0).unwrap();
        let gl = h.shell_density_integral(0.2, 0.21);
        let q = quadrature::integrate(|r| h.area_density(r), 0.2, 0.21, 1e-14);
        assert!(rel(gl, q) < 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ModelManifold::new(0, 0.0).is_err());
        assert!(ModelManifold::new(2, -1.0).is_err());
        assert!(ModelManifold::new(2, f64::NAN).is_err());
    }
}
