//! Scenario files: one TOML document per run.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use leibenson::certify::{BoundName, Calibration, CylinderSpec, DEFAULT_MASK_THRESHOLD};
use leibenson::diagnostics::{CutoffPair, TrialFunction};
use leibenson::exact::{calibrate_profile, heat_kernel_eval, BarenblattProfile};
use leibenson::solver::{Boundary, Positivity, Problem, RadialGrid, SolverConfig};
use leibenson::{DiffusionParams, ModelManifold, Regime};

use crate::error::{RunError, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub params: ParamSpec,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub certify: Vec<CertifySpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub calib: Calibration,
    #[serde(default)]
    pub validation: Option<ValidationSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dimension: usize,
    #[serde(default)]
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radius: f64,
    pub cells: usize,
}

fn default_cfl() -> f64 {
    SolverConfig::default().cfl_fraction
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub start: f64,
    pub end: f64,
    /// Uniformly spaced snapshots, both ends included.
    pub snapshots: usize,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
}

impl TimeSpec {
    pub fn snapshot_times(&self) -> Vec<f64> {
        uniform_times(self.start, self.end, self.snapshots)
    }
}

pub fn uniform_times(start: f64, end: f64, count: usize) -> Vec<f64> {
    let last = count - 1;
    (0..count)
        .map(|i| {
            if i == last {
                end
            } else {
                start + (end - start) * i as f64 / last as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Self-similar source solution of the given mass, sampled at the start time.
    Barenblatt { mass: f64 },
    /// Heat kernel sampled at the start time.
    Gaussian,
    /// `floor + amplitude · exp(-r²/width²)`.
    Bump { amplitude: f64, width: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    ZeroFlux,
    /// Ghost values from the closed-form solution of the initial data.
    Exact,
}

fn default_fraction() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    DEFAULT_MASK_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    pub bound: BoundName,
    pub alpha: f64,
    #[serde(default = "default_fraction")]
    pub fraction_r: f64,
    pub t1: f64,
    pub t2: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    /// Closed-form solution sampled on the grid.
    Exact,
    #[default]
    Computed,
}

impl TrajectorySource {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajectorySource::Exact => "exact",
            TrajectorySource::Computed => "computed",
        }
    }
}

fn default_bochner_threshold() -> f64 {
    0.1
}

fn default_stride() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BochnerSpec {
    pub alpha: f64,
    #[serde(default)]
    pub source: TrajectorySource,
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: usize,
    #[serde(default = "default_bochner_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub r_min: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaccioppoliSpec {
    pub alpha: f64,
    pub r_inner: f64,
    pub r_outer: f64,
    pub t_start: f64,
    pub t_ramp_end: f64,
    pub t_end: f64,
    pub snapshots: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl CaccioppoliSpec {
    pub fn cutoff(&self) -> leibenson::Result<CutoffPair> {
        CutoffPair::new(self.r_inner, self.r_outer, self.t_start, self.t_ramp_end, self.t_end)
    }
}

fn default_kappa() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevSpec {
    /// Ball radius; the grid radius when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Exponent used in dimensions one and two.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub trials: Vec<TrialFunction>,
}

fn default_depth() -> usize {
    leibenson::diagnostics::DEFAULT_SCHEDULE_DEPTH
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub lambda: f64,
    pub nu: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_draws() -> usize {
    100
}

fn default_jk_depth() -> usize {
    25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JkSpec {
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_jk_depth")]
    pub depth: usize,
}

fn default_phi_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub alpha: f64,
    #[serde(default = "default_phi_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub bochner: Vec<BochnerSpec>,
    #[serde(default)]
    pub caccioppoli: Vec<CaccioppoliSpec>,
    #[serde(default)]
    pub sobolev: Option<SobolevSpec>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub jk: Option<JkSpec>,
    #[serde(default)]
    pub phi: Option<PhiSpec>,
    /// Heat-kernel equality check for Gaussian scenarios.
    #[serde(default)]
    pub liyau_equality: bool,
}

impl DiagnosticsSpec {
    pub fn is_empty(&self) -> bool {
        self.bochner.is_empty()
            && self.caccioppoli.is_empty()
            && self.sobolev.is_none()
            && self.schedule.is_none()
            && self.jk.is_none()
            && self.phi.is_none()
            && !self.liyau_equality
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    /// Resolutions of the convergence study, increasing.
    pub cells: Vec<usize>,
    /// Comparison time; the end time when absent.
    #[serde(default)]
    pub at_time: Option<f64>,
}

/// Closed-form solution tied to the initial data, if any.
#[derive(Debug, Clone, Copy)]
pub enum ExactSolution {
    Barenblatt(BarenblattProfile),
    Heat { dimension: usize },
}

impl ExactSolution {
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        match self {
            ExactSolution::Barenblatt(p) => p.eval(r, t),
            ExactSolution::Heat { dimension } => heat_kernel_eval(*dimension, r, t),
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> RunError {
    RunError::Config {
        field: name.to_string(),
        reason: reason.into(),
    }
}

fn config(field: &str, e: leibenson::LabError) -> RunError {
    let field = match &e {
        leibenson::LabError::InvalidParameter { name, .. } => format!("{field}.{name}"),
        _ => field.to_string(),
    };
    RunError::Config {
        field,
        reason: e.to_string(),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| RunError::Config {
            field: "scenario".into(),
            reason: e.message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config {
            field: "scenario".into(),
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn diffusion(&self) -> RunResult<DiffusionParams> {
        DiffusionParams::new(self.params.p, self.params.q, self.manifold.dimension).map_err(|e| config("params", e))
    }

    pub fn model(&self) -> RunResult<ModelManifold> {
        ModelManifold::new(self.manifold.dimension, self.manifold.curvature).map_err(|e| config("manifold", e))
    }

    pub fn radial_grid(&self) -> RunResult<RadialGrid> {
        RadialGrid::new(self.grid.radius, self.grid.cells).map_err(|e| config("grid", e))
    }

    /// Checks every section; the first violated precondition is reported.
    pub fn validate(&self) -> RunResult<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("id", "must be a non-empty name of letters, digits, '-' or '_'"));
        }
        let params = self.diffusion()?;
        let regime = params.regime();
        if regime == Regime::FastInvalid {
            return Err(invalid("params", format!("fast diffusion needs p - nD > 0 ({regime})")));
        }
        let manifold = self.model()?;
        let grid = self.radial_grid()?;
        let t = &self.time;
        if !(t.start >= 0.0 && t.end > t.start && t.end.is_finite()) {
            return Err(invalid("time.end", format!("need 0 <= start < end, got [{}, {}]", t.start, t.end)));
        }
        if t.snapshots < 3 {
            return Err(invalid("time.snapshots", "need at least 3 snapshots"));
        }
        if !(t.cfl_fraction > 0.0 && t.cfl_fraction < 1.0) {
            return Err(invalid("time.cfl_fraction", "must lie in (0, 1)"));
        }
        match self.initial {
            InitialSpec::Barenblatt { mass } => {
                if regime != Regime::Slow || manifold.curvature() != 0.0 {
                    return Err(invalid("initial.kind", "barenblatt data needs the slow regime on flat space"));
                }
                if !(mass > 0.0) {
                    return Err(invalid("initial.mass", "must be positive"));
                }
                if !(t.start > 0.0) {
                    return Err(invalid("time.start", "barenblatt data needs a positive start time"));
                }
            }
            InitialSpec::Gaussian => {
                if regime != Regime::Borderline || self.params.p != 2.0 || manifold.curvature() != 0.0 {
                    return Err(invalid("initial.kind", "gaussian data needs p = 2, q = 1 on flat space"));
                }
                if !(t.start > 0.0) {
                    return Err(invalid("time.start", "gaussian data needs a positive start time"));
                }
            }
            InitialSpec::Bump { amplitude, width, floor } => {
                if !(amplitude >= 0.0 && width > 0.0 && floor > 0.0) {
                    return Err(invalid("initial", "bump needs amplitude >= 0, width > 0 and floor > 0"));
                }
            }
        }
        if self.boundary == BoundarySpec::Exact && matches!(self.initial, InitialSpec::Bump { .. }) {
            return Err(invalid("boundary", "exact boundary values need closed-form initial data"));
        }
        for (c, name) in [
            (self.calib.c, "calib.c"),
            (self.calib.c_prime, "calib.c_prime"),
            (self.calib.c_n, "calib.c_n"),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        let in_window = |x: f64| x >= t.start - 1e-12 && x <= t.end + 1e-12;
        for c in &self.certify {
            if c.bound.regime() != regime {
                return Err(invalid(
                    "certify.bound",
                    format!("{} applies to the {} regime, scenario is {regime}", c.bound, c.bound.regime()),
                ));
            }
            leibenson::certify::check_alpha(regime, c.alpha).map_err(|e| config("certify", e))?;
            CylinderSpec::new(c.fraction_r, c.t1, c.t2).map_err(|e| config("certify", e))?;
            if !in_window(c.t1) || !in_window(c.t2) {
                return Err(invalid("certify.t2", "cylinder must lie inside the time window"));
            }
            if !(c.threshold >= 0.0 && c.threshold < 1.0) {
                return Err(invalid("certify.threshold", "must lie in [0, 1)"));
            }
        }
        let d = &self.diagnostics;
        for b in &d.bochner {
            if !matches!(regime, Regime::Slow | Regime::Fast) {
                return Err(invalid("diagnostics.bochner", format!("not defined in the {regime} regime")));
            }
            leibenson::certify::check_alpha(regime, b.alpha).map_err(|e| config("diagnostics.bochner", e))?;
            if b.source == TrajectorySource::Exact && self.exact_solution_kind().is_none() {
                return Err(invalid("diagnostics.bochner.source", "no closed form for this initial data"));
            }
            if !(in_window(b.t_start) && in_window(b.t_end) && b.t_end > b.t_start && b.t_start > 0.0) {
                return Err(invalid("diagnostics.bochner.t_end", "window must lie inside the time range"));
            }
            if b.snapshots < 5 {
                return Err(invalid("diagnostics.bochner.snapshots", "need at least 5 snapshots"));
            }
        }
        for c in &d.caccioppoli {
            if !matches!(regime, Regime::Slow | Regime::Fast) {
                return Err(invalid("diagnostics.caccioppoli", format!("not defined in the {regime} regime")));
            }
            leibenson::certify::check_alpha(regime, c.alpha).map_err(|e| config("diagnostics.caccioppoli", e))?;
            c.cutoff().map_err(|e| config("diagnostics.caccioppoli", e))?;
            if !(in_window(c.t_start) && in_window(c.t_end) && c.t_start > 0.0) {
                return Err(invalid("diagnostics.caccioppoli.t_end", "window must lie inside the time range"));
            }
            if c.r_outer >= grid.radius() {
                return Err(invalid("diagnostics.caccioppoli.r_outer", "must lie inside the grid"));
            }
            if c.snapshots < 3 {
                return Err(invalid("diagnostics.caccioppoli.snapshots", "need at least 3 snapshots"));
            }
        }
        if let Some(s) = &d.sobolev {
            if s.radius.is_some_and(|r| !(r > 0.0)) {
                return Err(invalid("diagnostics.sobolev.radius", "must be positive"));
            }
            leibenson::diagnostics::sobolev_exponent(manifold.dimension(), s.kappa)
                .map_err(|e| config("diagnostics.sobolev", e))?;
        }
        if let Some(s) = &d.schedule {
            if !(s.lambda > 0.0 && s.nu > 0.0 && s.depth <= 50) {
                return Err(invalid("diagnostics.schedule", "need lambda > 0, nu > 0 and depth <= 50"));
            }
        }
        if let Some(phi) = &d.phi {
            if !matches!(regime, Regime::Slow | Regime::Fast) {
                return Err(invalid("diagnostics.phi", format!("not defined in the {regime} regime")));
            }
            leibenson::certify::check_alpha(regime, phi.alpha).map_err(|e| config("diagnostics.phi", e))?;
            if phi.samples < 2 {
                return Err(invalid("diagnostics.phi.samples", "need at least 2 samples"));
            }
        }
        if d.liyau_equality && !matches!(self.initial, InitialSpec::Gaussian) {
            return Err(invalid("diagnostics.liyau_equality", "needs gaussian initial data"));
        }
        if let Some(v) = &self.validation {
            if self.exact_solution_kind().is_none() {
                return Err(invalid("validation", "needs closed-form initial data"));
            }
            if v.cells.len() < 2 || v.cells.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("validation.cells", "need at least two increasing resolutions"));
            }
            if v.cells[0] < RadialGrid::MIN_CELLS {
                return Err(invalid("validation.cells", "resolution below the grid minimum"));
            }
            if v.at_time.is_some_and(|x| !(x > t.start && x <= t.end)) {
                return Err(invalid("validation.at_time", "must lie in (start, end]"));
            }
        }
        Ok(())
    }

    fn exact_solution_kind(&self) -> Option<()> {
        match self.initial {
            InitialSpec::Barenblatt { .. } | InitialSpec::Gaussian => Some(()),
            InitialSpec::Bump { .. } => None,
        }
    }

    pub fn exact_solution(&self) -> RunResult<Option<ExactSolution>> {
        Ok(match self.initial {
            InitialSpec::Barenblatt { mass } => Some(ExactSolution::Barenblatt(calibrate_profile(self.diffusion()?, mass)?)),
            InitialSpec::Gaussian => Some(ExactSolution::Heat {
                dimension: self.manifold.dimension,
            }),
            InitialSpec::Bump { .. } => None,
        })
    }

    /// Solver input with the given resolution and snapshot times.
    pub fn problem(&self, cells: usize, snapshot_times: Vec<f64>) -> RunResult<Problem> {
        let grid = RadialGrid::new(self.grid.radius, cells).map_err(|e| config("grid", e))?;
        let exact = self.exact_solution()?;
        let t0 = snapshot_times[0];
        let initial: Vec<f64> = match (self.initial, exact) {
            (InitialSpec::Bump { amplitude, width, floor }, _) => grid
                .nodes()
                .iter()
                .map(|&r| floor + amplitude * (-(r * r) / (width * width)).exp())
                .collect(),
            (_, Some(sol)) => grid.nodes().iter().map(|&r| sol.eval(r, t0)).collect(),
            _ => unreachable!("validated"),
        };
        let top = initial.iter().cloned().fold(0.0, f64::max);
        let positivity = match self.initial {
            InitialSpec::Barenblatt { .. } => Positivity::Clip { floor: 1e-12 * top },
            _ => Positivity::Abort { floor: 0.0 },
        };
        let boundary = match (self.boundary, exact) {
            (BoundarySpec::Exact, Some(sol)) => Boundary::Dirichlet(Arc::new(move |r, t| sol.eval(r, t))),
            _ => Boundary::ZeroFlux,
        };
        Ok(Problem {
            manifold: self.model()?,
            params: self.diffusion()?,
            grid,
            config: SolverConfig {
                cfl_fraction: self.time.cfl_fraction,
                positivity,
                ..SolverConfig::default()
            },
            boundary,
            initial,
            snapshot_times,
        })
    }

    /// Stable digest of the resolved scenario.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&hash[..8])
    }
}
