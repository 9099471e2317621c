//! Exponents `(p, q)`, regime classification, the pressure transform and
//! the explicit constants of the slow and fast gradient estimates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Width of the band around `q(p-1) = 1` treated as the heat-type borderline.
pub const BORDERLINE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Slow,
    Fast,
    Borderline,
    FastInvalid,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Slow => "slow",
            Regime::Fast => "fast",
            Regime::Borderline => "borderline",
            Regime::FastInvalid => "fast_invalid",
        };
        f.write_str(s)
    }
}

pub fn classify(p: f64, q: f64, n: usize) -> Result<Regime> {
    validate(p, q, n)?;
    let delta = q * (p - 1.0) - 1.0;
    Ok(if delta.abs() <= BORDERLINE_WIDTH {
        Regime::Borderline
    } else if delta > 0.0 {
        Regime::Slow
    } else if p + n as f64 * delta > 0.0 {
        Regime::Fast
    } else {
        Regime::FastInvalid
    })
}

fn validate(p: f64, q: f64, n: usize) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::param("p", format!("must exceed 1, got {p}")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(LabError::param("q", format!("must be positive, got {q}")));
    }
    if n < 1 {
        return Err(LabError::param("n", "dimension must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub p: f64,
    pub q: f64,
    pub n: usize,
}

impl DiffusionParams {
    pub fn new(p: f64, q: f64, n: usize) -> Result<Self> {
        validate(p, q, n)?;
        Ok(Self { p, q, n })
    }

    pub fn regime(&self) -> Regime {
        classify(self.p, self.q, self.n).expect("validated on construction")
    }

    /// `q(p-1) - 1`; positive in the slow regime.
    pub fn delta(&self) -> f64 {
        self.q * (self.p - 1.0) - 1.0
    }

    /// `1 - q(p-1)`; positive in the fast regime.
    pub fn fast_gap(&self) -> f64 {
        -self.delta()
    }

    /// `min(p-1, 1)`.
    pub fn a_p(&self) -> f64 {
        (self.p - 1.0).min(1.0)
    }

    fn dim(&self) -> f64 {
        self.n as f64
    }

    /// Coefficient and exponent of the pressure law `v = coef · u^expo`.
    fn pressure_law(&self) -> Result<(f64, f64)> {
        let qp = self.q * (self.p - 1.0);
        match self.regime() {
            Regime::Slow => {
                let d = self.delta();
                Ok((qp / d, d / (self.p - 1.0)))
            }
            Regime::Fast | Regime::FastInvalid => {
                let d = self.fast_gap();
                Ok((qp / d, -d / (self.p - 1.0)))
            }
            Regime::Borderline => Err(LabError::WrongRegime {
                expected: "slow or fast",
                found: Regime::Borderline,
            }),
        }
    }

    pub fn pressure(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(LabError::param("u", format!("must be positive, got {u}")));
        }
        let (c, e) = self.pressure_law()?;
        Ok(c * u.powf(e))
    }

    pub fn pressure_inverse(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(LabError::param("v", format!("must be positive, got {v}")));
        }
        let (c, e) = self.pressure_law()?;
        Ok((v / c).powf(1.0 / e))
    }

    /// Vectorised pressure for non-negative fields (zero maps to zero in the
    /// slow regime, which is the free-boundary limit).
    pub(crate) fn pressure_field(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (c, e) = self.pressure_law()?;
        Ok(u.iter().map(|&x| if x > 0.0 { c * x.powf(e) } else { 0.0 }).collect())
    }

    pub fn slow_constants(&self, alpha: f64) -> Result<SlowConstants> {
        if self.regime() != Regime::Slow {
            return Err(LabError::WrongRegime {
                expected: "slow",
                found: self.regime(),
            });
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(LabError::param("alpha", format!("slow estimates need alpha > 1, got {alpha}")));
        }
        let p = self.p;
        let n = self.dim();
        let d = self.delta();
        let ap = self.a_p();
        let nda2 = n * d * alpha * alpha;
        let c0 = (p - 1.0) * (alpha - 1.0) * (p * (alpha - 1.0) + alpha * n * d) / nda2;
        let c1 = (p - 1.0) * (p + alpha * n * d) / nda2;
        let c2 = 2.0 * (p - 1.0) * p * (alpha - 1.0) / nda2;
        let big_c1 =
            (2.0 * (p - 1.0) * ap + ap * ap * d + 16.0 * (p - 1.0).powi(2) * d) / ((p - 1.0) * ap);
        let big_c0 = (2.0 * (p - 1.0) * ap + ap * ap * d + 16.0 * (p - 1.0).powi(2) * d) * alpha * alpha * n * d
            / ((p + alpha * n * d) * (p - 1.0).powi(2) * ap);
        let young_gradient = 4.0 * (p - 1.0) * (d + p).powi(2) / (ap * d);
        Ok(SlowConstants {
            alpha,
            c0,
            c1,
            c2,
            c3: ap * d / (p - 1.0),
            cn: (p - 1.0) * (n * d + p) / (n * d),
            cdelta: p * d / (p - 1.0),
            beta: 2.0 * d + p,
            big_c1,
            big_c0,
            lambda_min_admissible: 1.0 + 2.0 * young_gradient / c2,
            delta: d,
            p,
            n: self.n,
        })
    }

    pub fn fast_constants(&self, alpha: f64, slack: FastSlack) -> Result<FastConstants> {
        let base = self.fast_base(alpha)?;
        base.check_slack(slack)?;
        Ok(FastConstants { slack, ..base })
    }

    /// Fast constants with the default slack parameters.
    pub fn fast_constants_default(&self, alpha: f64) -> Result<FastConstants> {
        let base = self.fast_base(alpha)?;
        let slack = base.default_slack();
        self.fast_constants(alpha, slack)
    }

    fn fast_base(&self, alpha: f64) -> Result<FastConstants> {
        if self.regime() != Regime::Fast {
            return Err(LabError::WrongRegime {
                expected: "fast",
                found: self.regime(),
            });
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(LabError::param("alpha", format!("fast estimates need 0 < alpha < 1, got {alpha}")));
        }
        let p = self.p;
        let n = self.dim();
        let d = self.fast_gap();
        let ap = self.a_p();
        let nda2 = n * d * alpha * alpha;
        Ok(FastConstants {
            alpha,
            c0: (1.0 - alpha) * (p - 1.0) * (p * (1.0 - alpha) + alpha * n * d) / nda2,
            c1: (p - 1.0) * (p - alpha * n * d) / nda2,
            c2: 2.0 * (p - 1.0) * p * (1.0 - alpha) / nda2,
            c3: ap * d / (p - 1.0),
            cn: (p - 1.0) * (p - n * d) / (n * d),
            c_gap: p * d / (p - 1.0),
            beta: p - 2.0 * d,
            big_c1: (2.0 * ap * (p - 1.0) + ap * ap * d + 32.0 * d * (p - 1.0).powi(2)) / (ap * (p - 1.0)),
            slack: FastSlack::default(),
            gap: d,
            p,
            a_p: ap,
            n: self.n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowConstants {
    pub alpha: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub cn: f64,
    pub cdelta: f64,
    pub beta: f64,
    /// Caccioppoli right-hand constant.
    pub big_c1: f64,
    /// Leading constant of the time-decay term.
    pub big_c0: f64,
    pub lambda_min_admissible: f64,
    pub delta: f64,
    pub p: f64,
    pub n: usize,
}

impl SlowConstants {
    /// Curvature summand of the global and ball bounds.
    pub fn curvature_term(&self, curvature_bound: f64, lambda_max: f64) -> f64 {
        let a = self.alpha;
        a * a * self.n as f64 * curvature_bound * self.delta * self.delta * lambda_max
            / ((self.p - 1.0) * (a - 1.0))
    }

    /// `(A, a, b)` of the slow auxiliary function.
    pub fn phi_parameters(&self, curvature_bound: f64, lambda_max: f64) -> (f64, f64, f64) {
        let root = 2.0 * self.c0.sqrt();
        (self.c1, self.c2 / root, self.cdelta * curvature_bound * lambda_max / root)
    }

    /// Integer exponent used by the Caccioppoli check.
    pub fn default_caccioppoli_exponent(&self) -> f64 {
        self.lambda_min_admissible.ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FastSlack {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastConstants {
    pub alpha: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub cn: f64,
    /// `pD/(p-1)`, the curvature coefficient.
    pub c_gap: f64,
    pub beta: f64,
    pub big_c1: f64,
    pub slack: FastSlack,
    /// `D = 1 - q(p-1)`.
    pub gap: f64,
    pub p: f64,
    pub a_p: f64,
    pub n: usize,
}

impl FastConstants {
    /// `4 c1 c0 - c2²`, positive whenever the fast regime is valid.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.c1 * self.c0 - self.c2 * self.c2
    }

    /// Closed form of [`Self::discriminant`].
    pub fn discriminant_closed_form(&self) -> f64 {
        let (p, d, n, a) = (self.p, self.gap, self.n as f64, self.alpha);
        4.0 * (p - 1.0).powi(2) * (1.0 - a) * (p - n * d) / (n * d * a * a)
    }

    /// The three quantities that must be positive; returned in order
    /// (joint, `c0 - eps2`, reduced).
    pub fn feasibility_margins(&self, s: FastSlack) -> [f64; 3] {
        let reduced_c0 = self.c0 - s.eps2;
        [
            4.0 * (self.c1 - s.eps3) * reduced_c0 - (self.c2 + s.eps1).powi(2),
            reduced_c0,
            4.0 * self.c1 * reduced_c0 - self.c2 * self.c2,
        ]
    }

    pub fn check_slack(&self, s: FastSlack) -> Result<()> {
        for (name, v) in [("eps1", s.eps1), ("eps2", s.eps2), ("eps3", s.eps3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::Infeasible(format!("{name} > 0 (got {v})")));
            }
        }
        let [joint, reduced_c0, reduced] = self.feasibility_margins(s);
        if !(reduced_c0 > 0.0) {
            return Err(LabError::Infeasible(format!("c0 - eps2 > 0 (value {reduced_c0:e})")));
        }
        if !(reduced > 0.0) {
            return Err(LabError::Infeasible(format!("4 c1 (c0 - eps2) - c2^2 > 0 (value {reduced:e})")));
        }
        if !(joint > 0.0) {
            return Err(LabError::Infeasible(format!(
                "4 (c1 - eps3)(c0 - eps2) - (c2 + eps1)^2 > 0 (value {joint:e})"
            )));
        }
        Ok(())
    }

    /// Default slack: `eps2` keeps half of the discriminant budget of the
    /// reduced condition, then `eps1 = eps3` is the largest common value
    /// keeping the joint condition at a quarter of `4 c1 c0 - c2²`.
    pub fn default_slack(&self) -> FastSlack {
        let eps2 = 0.5 * (self.c0 - self.c2 * self.c2 / (4.0 * self.c1));
        let target = 0.25 * self.discriminant();
        let joint = |e: f64| 4.0 * (self.c1 - e) * (self.c0 - eps2) - (self.c2 + e).powi(2);
        let (mut lo, mut hi) = (0.0, self.c1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if joint(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        FastSlack {
            eps1: lo,
            eps2,
            eps3: lo,
        }
    }

    /// Parameters `(a, b)` of the fast auxiliary function.
    pub fn phi_coefficients(&self, curvature_bound: f64, lambda_max: f64) -> (f64, f64) {
        let r = self.c0 - self.slack.eps2;
        let a = (4.0 * self.c1 * r - self.c2 * self.c2) / (4.0 * r);
        let b = (self.c_gap * curvature_bound * lambda_max).powi(2) / self.slack.eps2;
        (a, b)
    }

    /// Smallest exponent for which the gradient absorption step of the fast
    /// Caccioppoli argument goes through with the current `eps1`.
    pub fn lambda_min_admissible(&self) -> f64 {
        let (p, d) = (self.p, self.gap);
        1.0 + (p - d).powi(2) * (p - 1.0) / (self.slack.eps1 * self.a_p * d)
    }
}
