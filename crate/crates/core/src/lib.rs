//! Numerical laboratory for the doubly nonlinear diffusion equation
//! `∂_t u = Δ_p u^q` on rotationally symmetric model manifolds, with
//! certification of Li–Yau type gradient bounds along computed solutions.

pub mod certify;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod params;
pub mod phi;
pub mod quadrature;
pub mod solver;

pub use error::{LabError, Result};
pub use geometry::ModelManifold;
pub use params::{DiffusionParams, FastConstants, FastSlack, Regime, SlowConstants};
