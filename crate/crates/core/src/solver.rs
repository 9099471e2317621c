//! Explicit conservative finite-volume solver for radial solutions of
//! `∂_t u = Δ_p u^q` on a geodesic ball of a model manifold, plus the derived
//! pressure fields of a stored trajectory.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::ModelManifold;
use crate::params::{DiffusionParams, Regime};

/// Cell-centered grid on `[0, R]`: nodes `r_i = (i + 1/2) h`, `h = R/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius: f64,
    cells: usize,
}

impl RadialGrid {
    pub const MIN_CELLS: usize = 16;

    pub fn new(radius: f64, cells: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::param("radius", format!("must be positive, got {radius}")));
        }
        if cells < Self::MIN_CELLS {
            return Err(LabError::param(
                "cells",
                format!("need at least {} cells, got {cells}", Self::MIN_CELLS),
            ));
        }
        Ok(Self { radius, cells })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.radius / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.node(i)).collect()
    }

    /// Same ball with half the cells (cell `i` of the result covers cells
    /// `2i, 2i+1` of `self`).
    pub fn coarsened(&self) -> Result<Self> {
        Self::new(self.radius, self.cells / 2)
    }
}

/// Value function used for Dirichlet ghost cells: `(r, t) -> u`.
pub type BoundaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Boundary {
    ZeroFlux,
    /// Ghost value at `R + h/2` taken from the given solution.
    Dirichlet(BoundaryFn),
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::ZeroFlux => f.write_str("ZeroFlux"),
            Boundary::Dirichlet(_) => f.write_str("Dirichlet(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Positivity {
    /// Values below the floor are raised to it (free-boundary problems).
    Clip { floor: f64 },
    /// Falling below the floor is an error.
    Abort { floor: f64 },
}

impl Positivity {
    pub fn floor(&self) -> f64 {
        match *self {
            Positivity::Clip { floor } | Positivity::Abort { floor } => floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl_fraction: f64,
    /// Gradient regularization relative to `max |u^q|` of the initial data.
    pub eps_reg_factor: f64,
    pub positivity: Positivity,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_fraction: 0.4,
            eps_reg_factor: 1e-10,
            positivity: Positivity::Abort { floor: 0.0 },
        }
    }
}

/// Evolving state of one radial solution.
#[derive(Debug, Clone)]
pub struct RadialSolver {
    manifold: ModelManifold,
    params: DiffusionParams,
    grid: RadialGrid,
    config: SolverConfig,
    boundary: Boundary,
    /// Cell volumes per unit sphere area.
    volumes: Vec<f64>,
    /// Face areas per unit sphere area, faces `0..=m`.
    areas: Vec<f64>,
    eps_reg: f64,
    time: f64,
    u: Vec<f64>,
    steps: u64,
    // scratch
    flux: Vec<f64>,
    stiff: Vec<f64>,
    w: Vec<f64>,
}

impl RadialSolver {
    pub fn new(
        manifold: ModelManifold,
        params: DiffusionParams,
        grid: RadialGrid,
        config: SolverConfig,
        boundary: Boundary,
        t0: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if manifold.dimension() != params.n {
            return Err(LabError::param(
                "n",
                format!("manifold dimension {} differs from params n = {}", manifold.dimension(), params.n),
            ));
        }
        if initial.len() != grid.cells() {
            return Err(LabError::param(
                "initial",
                format!("expected {} values, got {}", grid.cells(), initial.len()),
            ));
        }
        if !(config.cfl_fraction > 0.0 && config.cfl_fraction <= 1.0) {
            return Err(LabError::param("cfl_fraction", format!("must lie in (0, 1], got {}", config.cfl_fraction)));
        }
        let m = grid.cells();
        let h = grid.spacing();
        let volumes = (0..m)
            .map(|i| manifold.shell_density_integral(i as f64 * h, (i + 1) as f64 * h))
            .collect();
        let areas = (0..=m).map(|j| manifold.area_density(j as f64 * h)).collect();
        let mut u = initial;
        let floor = config.positivity.floor();
        match config.positivity {
            Positivity::Clip { .. } => u.iter_mut().for_each(|x| *x = x.max(floor)),
            Positivity::Abort { .. } => check_floor(&u, floor, &grid)?,
        }
        let w_scale = u.iter().map(|&x| x.powf(params.q)).fold(0.0, f64::max);
        let eps_reg = config.eps_reg_factor * w_scale;
        Ok(Self {
            manifold,
            params,
            grid,
            config,
            boundary,
            volumes,
            areas,
            eps_reg,
            time: t0,
            u,
            steps: 0,
            flux: vec![0.0; m + 1],
            stiff: vec![0.0; m + 1],
            w: vec![0.0; m],
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn field(&self) -> &[f64] {
        &self.u
    }

    pub fn eps_reg(&self) -> f64 {
        self.eps_reg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `∫ u ψ^{n-1} dr` over the ball (per unit sphere area).
    pub fn discrete_mass(&self) -> f64 {
        self.u.iter().zip(&self.volumes).map(|(u, v)| u * v).sum()
    }

    /// Fills `flux` with area-weighted face fluxes and `stiff` with
    /// area-weighted `dF/dg / h`; returns the stability limit.
    fn evaluate(&mut self) -> f64 {
        let m = self.grid.cells();
        let h = self.grid.spacing();
        let p = self.params.p;
        let q = self.params.q;
        let eps2 = self.eps_reg * self.eps_reg;
        for (w, &u) in self.w.iter_mut().zip(&self.u) {
            *w = pow_fast(u, q);
        }
        let face = |g: f64| -> (f64, f64) {
            if p == 2.0 {
                (g, 1.0)
            } else {
                let s = g * g + eps2;
                if s == 0.0 {
                    return (0.0, 0.0);
                }
                let base = s.powf(0.5 * (p - 2.0));
                // d/dg [(g² + ε²)^{(p-2)/2} g]
                (base * g, base * ((p - 1.0) * g * g + eps2) / s)
            }
        };
        self.flux[0] = 0.0;
        self.stiff[0] = 0.0;
        for j in 1..m {
            let g = (self.w[j] - self.w[j - 1]) / h;
            let (f, df) = face(g);
            self.flux[j] = self.areas[j] * f;
            self.stiff[j] = self.areas[j] * df / h;
        }
        match &self.boundary {
            Boundary::ZeroFlux => {
                self.flux[m] = 0.0;
                self.stiff[m] = 0.0;
            }
            Boundary::Dirichlet(exact) => {
                let ghost = exact(self.grid.radius() + 0.5 * h, self.time).max(0.0);
                let g = (pow_fast(ghost, q) - self.w[m - 1]) / h;
                let (f, df) = face(g);
                self.flux[m] = self.areas[m] * f;
                self.stiff[m] = self.areas[m] * df / h;
            }
        }
        let mut limit = f64::INFINITY;
        for i in 0..m {
            let dw_du = q * pow_fast(self.u[i], q - 1.0);
            let denom = (self.stiff[i] + self.stiff[i + 1]) * dw_du;
            if denom > 0.0 {
                limit = limit.min(self.volumes[i] / denom);
            }
        }
        limit
    }

    /// Largest stable explicit step for the current state.
    pub fn stability_limit(&mut self) -> f64 {
        self.evaluate()
    }

    /// One explicit step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let limit = self.evaluate();
        if dt > limit {
            return Err(LabError::StepTooLarge { dt, limit });
        }
        self.apply(dt, self.time + dt)
    }

    fn apply(&mut self, dt: f64, new_time: f64) -> Result<()> {
        for i in 0..self.u.len() {
            self.u[i] += dt / self.volumes[i] * (self.flux[i + 1] - self.flux[i]);
        }
        self.time = new_time;
        self.steps += 1;
        match self.config.positivity {
            Positivity::Clip { floor } => self.u.iter_mut().for_each(|x| *x = x.max(floor)),
            Positivity::Abort { floor } => check_floor(&self.u, floor, &self.grid)?,
        }
        Ok(())
    }

    /// Advances with adaptive steps `cfl_fraction · limit`, landing exactly on `target`.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.time < target {
            let limit = self.evaluate();
            let remaining = target - self.time;
            let proposal = self.config.cfl_fraction * limit;
            let (dt, next) = if proposal >= remaining * (1.0 - 1e-12) {
                (remaining, target)
            } else {
                (proposal, self.time + proposal)
            };
            let t_now = self.time;
            if !(dt > 0.0 && next > t_now) {
                return Err(LabError::AtTime {
                    t: t_now,
                    source: Box::new(LabError::StepTooLarge { dt, limit }),
                });
            }
            self.apply(dt, next).map_err(|e| LabError::AtTime {
                t: t_now,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    pub fn manifold(&self) -> ModelManifold {
        self.manifold
    }
}

fn pow_fast(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

fn check_floor(u: &[f64], floor: f64, grid: &RadialGrid) -> Result<()> {
    let (idx, &min_u) = u
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty field");
    if !(min_u > floor) || !min_u.is_finite() {
        return Err(LabError::PositivityViolated {
            min_u,
            floor,
            r: grid.node(idx),
        });
    }
    Ok(())
}

/// Everything needed to run one solve.
#[derive(Debug, Clone)]
pub struct Problem {
    pub manifold: ModelManifold,
    pub params: DiffusionParams,
    pub grid: RadialGrid,
    pub config: SolverConfig,
    pub boundary: Boundary,
    pub initial: Vec<f64>,
    /// Increasing; the first entry is the initial time.
    pub snapshot_times: Vec<f64>,
}

pub fn solve(problem: &Problem) -> Result<RadialTrajectory> {
    let times = &problem.snapshot_times;
    if times.is_empty() {
        return Err(LabError::param("snapshot_times", "need at least the initial time"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::param("snapshot_times", "must be strictly increasing"));
    }
    let mut solver = RadialSolver::new(
        problem.manifold,
        problem.params,
        problem.grid,
        problem.config,
        problem.boundary.clone(),
        times[0],
        problem.initial.clone(),
    )?;
    let mut u = vec![solver.field().to_vec()];
    for &t in &times[1..] {
        solver.advance_to(t)?;
        u.push(solver.field().to_vec());
    }
    Ok(RadialTrajectory {
        manifold: problem.manifold,
        params: problem.params,
        grid: problem.grid,
        times: times.clone(),
        u,
        eps_reg: solver.eps_reg(),
        steps: solver.steps(),
    })
}

/// Stored snapshots of a radial solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTrajectory {
    pub manifold: ModelManifold,
    pub params: DiffusionParams,
    pub grid: RadialGrid,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub eps_reg: f64,
    pub steps: u64,
}

/// Per-snapshot derived fields, indexed `[snapshot][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub v: Vec<Vec<f64>>,
    pub dvdr: Vec<Vec<f64>>,
    pub dtv: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

impl RadialTrajectory {
    /// Samples a closed-form solution `(r, t) -> u` on the grid.
    pub fn from_exact<F: Fn(f64, f64) -> f64 + Sync>(
        manifold: ModelManifold,
        params: DiffusionParams,
        grid: RadialGrid,
        times: Vec<f64>,
        exact: F,
    ) -> Self {
        let nodes = grid.nodes();
        let u = times
            .par_iter()
            .map(|&t| nodes.iter().map(|&r| exact(r, t)).collect())
            .collect();
        Self {
            manifold,
            params,
            grid,
            times,
            u,
            eps_reg: 0.0,
            steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Computes `v, ∂_r v, ∂_t v, Λ, y, z` from `u` alone.
    ///
    /// In the borderline regime the pressure degenerates; there `v = u` and
    /// `y = |∂_r u / u|^p`, `z = ∂_t u / u` (the classical logarithmic form).
    pub fn derived(&self) -> Result<DerivedFields> {
        if self.times.len() < 2 {
            return Err(LabError::param("snapshots", "derived fields need at least two snapshots"));
        }
        let p = self.params.p;
        let h = self.grid.spacing();
        let borderline = self.params.regime() == Regime::Borderline;
        let v: Vec<Vec<f64>> = if borderline {
            self.u.clone()
        } else {
            self.u
                .par_iter()
                .map(|u| self.params.pressure_field(u))
                .collect::<Result<_>>()?
        };
        let dvdr: Vec<Vec<f64>> = v.par_iter().map(|f| radial_derivative(f, h)).collect();
        let dtv = time_derivative(&self.times, &v);
        let mut lambda = Vec::with_capacity(v.len());
        let mut y = Vec::with_capacity(v.len());
        let mut z = Vec::with_capacity(v.len());
        for k in 0..v.len() {
            let (vk, gk, tk) = (&v[k], &dvdr[k], &dtv[k]);
            lambda.push(vk.iter().zip(gk).map(|(&v, &g)| g.abs().powf(p - 2.0) * v).collect());
            if borderline {
                y.push(vk.iter().zip(gk).map(|(&v, &g)| (g / v).abs().powf(p)).collect());
            } else {
                y.push(vk.iter().zip(gk).map(|(&v, &g)| g.abs().powf(p) / v).collect());
            }
            z.push(vk.iter().zip(tk).map(|(&v, &d)| d / v).collect());
        }
        Ok(DerivedFields {
            v,
            dvdr,
            dtv,
            lambda,
            y,
            z,
        })
    }
}

/// First derivative on the cell-centered grid: fourth-order central in the
/// interior, second-order central next to the ends and second-order one-sided
/// at the two end cells.
pub fn radial_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    assert!(m >= 5, "need at least five nodes");
    let mut d = vec![0.0; m];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
    d[1] = (f[2] - f[0]) / (2.0 * h);
    d[m - 2] = (f[m - 1] - f[m - 3]) / (2.0 * h);
    for i in 2..m - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    d
}

/// Time derivative across snapshots: three-point centered (non-uniform) in the
/// interior, three-point one-sided at the ends, two-point with two snapshots.
pub fn time_derivative(times: &[f64], series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = times.len();
    let m = series[0].len();
    if k == 2 {
        let d: Vec<f64> = (0..m)
            .map(|i| (series[1][i] - series[0][i]) / (times[1] - times[0]))
            .collect();
        return vec![d.clone(), d];
    }
    (0..k)
        .into_par_iter()
        .map(|j| {
            let (a, b, c, ia, ib, ic) = if j == 0 {
                let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
                let s = h1 + h2;
                (-(2.0 * h1 + h2) / (h1 * s), s / (h1 * h2), -h1 / (h2 * s), 0, 1, 2)
            } else if j == k - 1 {
                let (h1, h2) = (times[k - 2] - times[k - 3], times[k - 1] - times[k - 2]);
                let s = h1 + h2;
                (h2 / (h1 * s), -s / (h1 * h2), (h1 + 2.0 * h2) / (h2 * s), k - 3, k - 2, k - 1)
            } else {
                let (h1, h2) = (times[j] - times[j - 1], times[j + 1] - times[j]);
                let s = h1 + h2;
                (-h2 / (h1 * s), (h2 - h1) / (h1 * h2), h1 / (h2 * s), j - 1, j, j + 1)
            };
            (0..m)
                .map(|i| a * series[ia][i] + b * series[ib][i] + c * series[ic][i])
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{calibrate_profile, heat_kernel_eval};

    fn euclid(n: usize) -> ModelManifold {
        ModelManifold::euclidean(n).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = RadialGrid::new(2.0, 16).unwrap();
        assert_eq!(g.spacing() * 16.0, 2.0);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(nodes[0] > 0.0 && *nodes.last().unwrap() < 2.0);
        assert!(RadialGrid::new(1.0, 8).is_err());
    }

    #[test]
    fn constant_state_is_stationary() {
        let params = DiffusionParams::new(2.5, 1.0, 3).unwrap();
        let grid = RadialGrid::new(1.0, 32).unwrap();
        let mut s = RadialSolver::new(
            ModelManifold::new(3, 1.0).unwrap(),
            params,
            grid,
            SolverConfig::default(),
            Boundary::ZeroFlux,
            0.0,
            vec![0.7; 32],
        )
        .unwrap();
        s.advance_to(0.5).unwrap();
        assert!(s.field().iter().all(|&u| u == 0.7));
    }

    #[test]
    fn rejects_oversized_step() {
        let params = DiffusionParams::new(2.0, 2.0, 2).unwrap();
        let grid = RadialGrid::new(1.0, 32).unwrap();
        let init: Vec<f64> = grid.nodes().iter().map(|r| 1.0 + r * r).collect();
        let mut s = RadialSolver::new(euclid(2), params, grid, SolverConfig::default(), Boundary::ZeroFlux, 0.0, init)
            .unwrap();
        let limit = s.stability_limit();
        assert!(matches!(s.step(2.0 * limit), Err(LabError::StepTooLarge { .. })));
        s.step(0.5 * limit).unwrap();
    }

    #[test]
    fn mass_conserved_under_zero_flux() {
        let params = DiffusionParams::new(1.8, 0.9, 3).unwrap();
        let grid = RadialGrid::new(2.0, 64).unwrap();
        let init: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| 1.0 + 0.5 * (1.0 + (std::f64::consts::PI * r / 2.0).cos()))
            .collect();
        let mut s = RadialSolver::new(
            ModelManifold::new(3, 1.0).unwrap(),
            params,
            grid,
            SolverConfig::default(),
            Boundary::ZeroFlux,
            0.0,
            init,
        )
        .unwrap();
        let m0 = s.discrete_mass();
        s.advance_to(0.2).unwrap();
        assert!(((s.discrete_mass() - m0) / m0).abs() < 1e-8);
    }

    #[test]
    fn positivity_abort_reports_radius() {
        let params = DiffusionParams::new(2.0, 2.0, 2).unwrap();
        let grid = RadialGrid::new(1.0, 16).unwrap();
        let mut init = vec![1.0; 16];
        init[3] = 0.0;
        let err = RadialSolver::new(
            euclid(2),
            params,
            grid,
            SolverConfig {
                positivity: Positivity::Abort { floor: 1e-12 },
                ..SolverConfig::default()
            },
            Boundary::ZeroFlux,
            0.0,
            init,
        )
        .unwrap_err();
        assert!(matches!(err, LabError::PositivityViolated { r, .. } if (r - grid.node(3)).abs() < 1e-15));
    }

    #[test]
    fn zero_duration_keeps_initial_data() {
        let params = DiffusionParams::new(2.0, 2.0, 2).unwrap();
        let grid = RadialGrid::new(1.0, 16).unwrap();
        let problem = Problem {
            manifold: euclid(2),
            params,
            grid,
            config: SolverConfig::default(),
            boundary: Boundary::ZeroFlux,
            initial: vec![1.0; 16],
            snapshot_times: vec![0.0],
        };
        let traj = solve(&problem).unwrap();
        assert_eq!(traj.u.len(), 1);
        assert_eq!(traj.u[0], vec![1.0; 16]);
    }

    #[test]
    fn derivative_of_linear_and_quartic() {
        let g = RadialGrid::new(1.0, 40).unwrap();
        let r = g.nodes();
        let d = radial_derivative(&r, g.spacing());
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-10));
        let f: Vec<f64> = r.iter().map(|x| x.powi(4)).collect();
        let d = radial_derivative(&f, g.spacing());
        for i in 2..38 {
            assert!((d[i] - 4.0 * r[i].powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn time_derivative_quadratic_exact() {
        let times = vec![0.0, 0.1, 0.25, 0.3, 0.5];
        let series: Vec<Vec<f64>> = times.iter().map(|&t| vec![t * t + 3.0 * t]).collect();
        let d = time_derivative(&times, &series);
        for (j, &t) in times.iter().enumerate() {
            assert!((d[j][0] - (2.0 * t + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_pressure_has_zero_z() {
        let params = DiffusionParams::new(2.0, 2.0, 3).unwrap();
        let grid = RadialGrid::new(1.0, 32).unwrap();
        let traj = RadialTrajectory::from_exact(euclid(3), params, grid, vec![0.0, 0.5, 1.0], |r, _| 1.0 + r);
        let d = traj.derived().unwrap();
        assert!(d.z.iter().flatten().all(|&z| z == 0.0));
        for k in 0..3 {
            for i in 0..32 {
                let v = params.pressure(traj.u[k][i]).unwrap();
                assert!((d.v[k][i] - v).abs() <= 1e-12 * v);
            }
        }
    }

    #[test]
    fn heat_gaussian_matches_kernel() {
        let params = DiffusionParams::new(2.0, 1.0, 2).unwrap();
        let grid = RadialGrid::new(8.0, 128).unwrap();
        let exact = |r: f64, t: f64| heat_kernel_eval(2, r, t);
        let problem = Problem {
            manifold: euclid(2),
            params,
            grid,
            config: SolverConfig {
                positivity: Positivity::Abort { floor: 0.0 },
                ..SolverConfig::default()
            },
            boundary: Boundary::Dirichlet(Arc::new(exact)),
            initial: grid.nodes().iter().map(|&r| exact(r, 1.0)).collect(),
            snapshot_times: vec![1.0, 2.0],
        };
        let traj = solve(&problem).unwrap();
        let peak = exact(0.0, 2.0);
        let err = grid
            .nodes()
            .iter()
            .zip(&traj.u[1])
            .map(|(&r, &u)| (u - exact(r, 2.0)).abs())
            .fold(0.0, f64::max);
        assert!(err / peak < 0.01, "relative error {}", err / peak);
    }

    #[test]
    fn barenblatt_short_run_coarse() {
        let params = DiffusionParams::new(2.0, 2.0, 3).unwrap();
        let prof = calibrate_profile(params, 1.0).unwrap();
        let grid = RadialGrid::new(2.5, 64).unwrap();
        let init: Vec<f64> = grid.nodes().iter().map(|&r| prof.eval(r, 1.0)).collect();
        let floor = 1e-12 * init.iter().cloned().fold(0.0, f64::max);
        let problem = Problem {
            manifold: euclid(3),
            params,
            grid,
            config: SolverConfig {
                positivity: Positivity::Clip { floor },
                ..SolverConfig::default()
            },
            boundary: Boundary::ZeroFlux,
            initial: init,
            snapshot_times: vec![1.0, 1.5],
        };
        let traj = solve(&problem).unwrap();
        assert!(traj.u[1].iter().all(|&u| u >= floor));
        let peak = prof.eval(0.0, 1.5);
        let err = grid
            .nodes()
            .iter()
            .zip(&traj.u[1])
            .map(|(&r, &u)| (u - prof.eval(r, 1.5)).abs())
            .fold(0.0, f64::max);
        assert!(err / peak < 0.1);
    }
}
