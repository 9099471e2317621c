use thiserror::Error;

use crate::params::Regime;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires the {expected} regime, parameters are {found}")]
    WrongRegime { expected: &'static str, found: Regime },

    #[error("infeasible slack parameters: violates {0}")]
    Infeasible(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("positivity lost: min u = {min_u:e} below floor {floor:e} at r = {r}")]
    PositivityViolated { min_u: f64, floor: f64, r: f64 },

    #[error("solver failed at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<LabError>,
    },

    #[error("profile calibration failed: {0}")]
    Calibration(String),

    #[error("hypothesis unmet: {0}")]
    Hypothesis(String),

    #[error("continuity root solve failed for (A, a, b) = ({big_a}, {a}, {b}): {reason}")]
    RootSolve {
        big_a: f64,
        a: f64,
        b: f64,
        reason: String,
    },

    #[error("{0}")]
    Invalid(String),
}

impl LabError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
