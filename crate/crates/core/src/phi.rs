//! Auxiliary time functions subtracted from `F_α` before the energy argument.
//!
//! The slow-case function glues a pure decay branch `1/(At + a/(2b))` to a
//! `tanh` branch at the switch time `t_s = a(1-ε)/(2Ab)`; the fast-case
//! function is a single `tanh` solving `φ' + aφ² = b`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhiSlow {
    /// Flat curvature: the correction vanishes.
    Zero,
    Glued(GluedPhi),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GluedPhi {
    pub big_a: f64,
    pub a: f64,
    pub b: f64,
    pub eps_match: f64,
    pub xi_match: f64,
    pub t_switch: f64,
}

/// Which piece of the glued function a time falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Decay,
    Tanh,
}

impl PhiSlow {
    /// Builds the glued function. `b = 0` (flat curvature) returns [`PhiSlow::Zero`].
    pub fn build(big_a: f64, a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("A", big_a), ("a", a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::param(name, format!("must be positive, got {v}")));
            }
        }
        if b == 0.0 {
            return Ok(PhiSlow::Zero);
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(LabError::param("b", format!("must be non-negative, got {b}")));
        }
        let root_a = big_a.sqrt();
        // Continuity at t_s reduces to tanh(X) = -aε/(2√A), X = a(1-ε)/(2√A) + √A ξ,
        // which is solvable for ξ exactly when aε/(2√A) < 1.
        let eps_max = (2.0 * root_a / a).min(1.0);
        let eps = 0.5 * eps_max;
        let target = -a * eps / (2.0 * root_a);
        if !(target > -1.0) {
            return Err(LabError::RootSolve {
                big_a,
                a,
                b,
                reason: format!("tanh target {target} outside (-1, 1)"),
            });
        }
        let xi = (target.atanh() - a * (1.0 - eps) / (2.0 * root_a)) / root_a;
        if !xi.is_finite() {
            return Err(LabError::RootSolve {
                big_a,
                a,
                b,
                reason: "non-finite shift".into(),
            });
        }
        let phi = GluedPhi {
            big_a,
            a,
            b,
            eps_match: eps,
            xi_match: xi,
            t_switch: a * (1.0 - eps) / (2.0 * big_a * b),
        };
        let gap = phi.continuity_residual();
        if gap > 1e-12 {
            return Err(LabError::RootSolve {
                big_a,
                a,
                b,
                reason: format!("continuity residual {gap:e}"),
            });
        }
        Ok(PhiSlow::Glued(phi))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            PhiSlow::Zero => 0.0,
            PhiSlow::Glued(g) => g.value(t),
        }
    }

    /// Upper bound `2b/a` (zero for the flat case).
    pub fn ceiling(&self) -> f64 {
        match self {
            PhiSlow::Zero => 0.0,
            PhiSlow::Glued(g) => 2.0 * g.b / g.a,
        }
    }
}

impl GluedPhi {
    pub fn branch(&self, t: f64) -> Branch {
        if t < self.t_switch {
            Branch::Decay
        } else {
            Branch::Tanh
        }
    }

    fn tanh_arg(&self, t: f64) -> f64 {
        let s = self.big_a.sqrt();
        s * self.b * t + s * self.xi_match
    }

    pub fn decay_value(&self, t: f64) -> f64 {
        1.0 / (self.big_a * t + self.a / (2.0 * self.b))
    }

    pub fn decay_derivative(&self, t: f64) -> f64 {
        let d = self.big_a * t + self.a / (2.0 * self.b);
        -self.big_a / (d * d)
    }

    pub fn tanh_value(&self, t: f64) -> f64 {
        self.b / (self.a + self.big_a.sqrt() * self.tanh_arg(t).tanh())
    }

    pub fn tanh_derivative(&self, t: f64) -> f64 {
        let x = self.tanh_arg(t);
        let den = self.a + self.big_a.sqrt() * x.tanh();
        let sech = 1.0 / x.cosh();
        -self.big_a * self.b * self.b * sech * sech / (den * den)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.branch(t) {
            Branch::Decay => self.decay_value(t),
            Branch::Tanh => self.tanh_value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.branch(t) {
            Branch::Decay => self.decay_derivative(t),
            Branch::Tanh => self.tanh_derivative(t),
        }
    }

    /// Relative mismatch of the two branches at the switch time.
    pub fn continuity_residual(&self) -> f64 {
        let left = self.decay_value(self.t_switch);
        let right = self.tanh_value(self.t_switch);
        (left - right).abs() / left.abs()
    }
}

/// Outcome of checking the two branch conditions at sampled times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiSlowCheck {
    /// min over decay samples of `Aφ² + φ'`, relative to the larger term.
    pub decay_ode_slack: f64,
    /// min over decay samples of `φ - b/a`, relative to `b/a`.
    pub decay_floor_slack: f64,
    /// min over tanh samples of `Aφ² + φ' - (aφ - b)²`, relative to the
    /// largest term.
    pub tanh_slack: f64,
    pub max_over_ceiling: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Checks both branch properties with closed-form derivatives. Samples equal
/// to the switch time are skipped.
pub fn check_phi_slow(phi: &GluedPhi, samples: &[f64]) -> PhiSlowCheck {
    let mut decay_ode = f64::INFINITY;
    let mut decay_floor = f64::INFINITY;
    let mut tanh_slack = f64::INFINITY;
    let mut over = f64::NEG_INFINITY;
    let ceiling = 2.0 * phi.b / phi.a;
    let mut used = 0;
    for &t in samples {
        if t <= 0.0 || t == phi.t_switch {
            continue;
        }
        used += 1;
        let v = phi.value(t);
        let d = phi.derivative(t);
        over = over.max(v - ceiling);
        let quad = phi.big_a * v * v;
        match phi.branch(t) {
            Branch::Decay => {
                decay_ode = decay_ode.min((quad + d) / quad.max(d.abs()));
                let floor = phi.b / phi.a;
                decay_floor = decay_floor.min((v - floor) / floor);
            }
            Branch::Tanh => {
                let r = phi.a * v - phi.b;
                let scale = quad.max(d.abs()).max(r * r);
                tanh_slack = tanh_slack.min((quad + d - r * r) / scale);
            }
        }
    }
    let pass = decay_ode >= -1e-10 && decay_floor >= -1e-12 && tanh_slack >= -1e-10 && over <= 1e-12 * ceiling;
    PhiSlowCheck {
        decay_ode_slack: decay_ode,
        decay_floor_slack: decay_floor,
        tanh_slack,
        max_over_ceiling: over,
        samples: used,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiFast {
    pub a: f64,
    pub b: f64,
    pub shift: f64,
}

impl PhiFast {
    /// `b = 0` gives the zero function.
    pub fn build(a: f64, b: f64, shift: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(LabError::param("a", format!("must be positive, got {a}")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(LabError::param("b", format!("must be non-negative, got {b}")));
        }
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(LabError::param("shift", format!("must be positive, got {shift}")));
        }
        Ok(Self { a, b, shift })
    }

    pub fn ceiling(&self) -> f64 {
        (self.b / self.a).sqrt()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ceiling() * ((self.a * self.b).sqrt() * (self.shift + t)).tanh()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let sech = 1.0 / ((self.a * self.b).sqrt() * (self.shift + t)).cosh();
        self.b * sech * sech
    }

    /// `max |φ' + aφ² - b| / b` over the samples (absolute when `b = 0`).
    pub fn residual(&self, samples: &[f64]) -> f64 {
        let scale = if self.b > 0.0 { self.b } else { 1.0 };
        samples
            .iter()
            .map(|&t| {
                let v = self.value(t);
                (self.derivative(t) + self.a * v * v - self.b).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// `count` log-spaced times in `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn glued(a_big: f64, a: f64, b: f64) -> GluedPhi {
        match PhiSlow::build(a_big, a, b).unwrap() {
            PhiSlow::Glued(g) => g,
            PhiSlow::Zero => panic!("expected glued"),
        }
    }

    #[test]
    fn flat_case_is_zero() {
        let phi = PhiSlow::build(1.0, 1.0, 0.0).unwrap();
        assert_eq!(phi, PhiSlow::Zero);
        assert_eq!(phi.value(3.0), 0.0);
    }

    #[test]
    fn unit_parameters() {
        let g = glued(1.0, 1.0, 1.0);
        assert!((g.decay_value(0.0) - 2.0).abs() < 1e-15);
        assert!(g.value(1e-9) < 2.0);
        assert!(g.continuity_residual() <= 1e-12);
        assert!(g.eps_match > 0.0 && g.eps_match < 1.0);
    }

    #[test]
    fn branch_identities() {
        let g = glued(0.7, 2.5, 0.4);
        let before = log_samples(1e-6 * g.t_switch, 0.999 * g.t_switch, 1000);
        let after = log_samples(1.001 * g.t_switch, 1e3 * g.t_switch, 1000);
        for &t in &before {
            let v = g.value(t);
            assert!((g.big_a * v * v + g.derivative(t)).abs() < 1e-12);
            assert!(v >= g.b / g.a - 1e-12);
        }
        for &t in &after {
            let v = g.value(t);
            let r = g.a * v - g.b;
            assert!((g.big_a * v * v + g.derivative(t) - r * r).abs() < 1e-12);
        }
        let mut all = before;
        all.extend(after);
        assert!(check_phi_slow(&g, &all).pass);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = glued(1.3, 0.8, 0.6);
        for &t in &[0.2 * g.t_switch, 2.0 * g.t_switch] {
            let h = 1e-6 * t;
            let fd = (g.value(t + h) - g.value(t - h)) / (2.0 * h);
            assert!((fd - g.derivative(t)).abs() < 1e-6 * g.derivative(t).abs().max(1e-3));
        }
    }

    #[test]
    fn large_a_relative_to_root_big_a() {
        // 2√A/a < 1 forces ε below 1
        let g = glued(0.01, 5.0, 2.0);
        assert!(g.eps_match < 0.5 * 2.0 * 0.1 / 5.0 + 1e-15);
        assert!(g.continuity_residual() <= 1e-12);
    }

    #[test]
    fn fast_unit_case() {
        let phi = PhiFast::build(1.0, 1.0, 1.0).unwrap();
        assert!((phi.value(0.0) - 1.0f64.tanh()).abs() < 1e-15);
        let ts: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert!(phi.residual(&ts) < 1e-12);
        let mut prev = 0.0;
        for &t in &ts[..30] {
            let v = phi.value(t);
            assert!(v >= prev && v <= phi.ceiling());
            prev = v;
        }
    }

    #[test]
    fn fast_zero_b() {
        let phi = PhiFast::build(2.0, 0.0, 1.0).unwrap();
        assert_eq!(phi.value(5.0), 0.0);
        assert_eq!(phi.residual(&[0.0, 1.0, 100.0]), 0.0);
    }
}
