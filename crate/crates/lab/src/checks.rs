//! Checks that run outside a single trajectory: recursion suites, auxiliary
//! function properties, convergence studies and the heat-kernel equality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use leibenson::diagnostics::{jk_bound_check, jk_check_sequence, jk_collapsed_log_bound, JkParams, JkReport, JK_TIGHT};
use leibenson::exact::heat_kernel_harnack;
use leibenson::phi::{check_phi_slow, log_samples, PhiFast, PhiSlow};
use leibenson::solver::solve;
use leibenson::{DiffusionParams, Regime};

use crate::error::RunResult;
use crate::scenario::Scenario;

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DiagnosticRow {
    pub check_name: String,
    pub scenario_id: String,
    pub params_digest: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: String,
    pub seed: u64,
}

pub fn verdict(pass: bool) -> String {
    if pass { "pass" } else { "fail" }.to_string()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JkSuite {
    pub extremal: Vec<JkReport>,
    pub sub_extremal: Vec<JkReport>,
    /// Largest `|ln B_k - ln B_k^{A=1}|` over the collapse cases.
    pub collapse_gap: f64,
}

impl JkSuite {
    pub fn min_log_slack(&self) -> f64 {
        self.extremal
            .iter()
            .chain(&self.sub_extremal)
            .map(|r| r.min_log_slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn extremal_tight(&self) -> bool {
        self.extremal.iter().all(|r| r.max_abs_log_slack <= JK_TIGHT)
    }

    pub fn pass(&self) -> bool {
        self.extremal.iter().chain(&self.sub_extremal).all(|r| r.pass) && self.collapse_gap == 0.0
    }
}

/// Random draws with log-uniform `A, Θ ∈ [1e-3, 1e3]`, `J₀ ∈ [1e-6, 1e6]` and
/// uniform `ω ∈ [0.1, 2]`; each draw is run as the extremal sequence and once
/// more with random shrink factors.
pub fn jk_random_suite(seed: u64, draws: usize, depth: usize) -> RunResult<JkSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extremal = Vec::with_capacity(draws);
    let mut sub_extremal = Vec::with_capacity(draws);
    let mut collapse_gap = 0.0f64;
    for _ in 0..draws {
        let params = JkParams {
            a: log_uniform(&mut rng, 1e-3, 1e3),
            theta: log_uniform(&mut rng, 1e-3, 1e3),
            omega: rng.random_range(0.1..=2.0),
            j0: log_uniform(&mut rng, 1e-6, 1e6),
        };
        extremal.push(jk_bound_check(&params, depth)?);
        let shrink: Vec<f64> = (0..depth).map(|_| rng.random_range(0.05f64..=1.0).ln()).collect();
        sub_extremal.push(jk_check_sequence(&params, depth, &shrink)?);
        let flat = JkParams { a: 1.0, ..params };
        for k in 0..=depth {
            let gap = (flat.log_bound(k).0 - jk_collapsed_log_bound(flat.theta, flat.omega, flat.j0, k)).abs();
            collapse_gap = collapse_gap.max(gap);
        }
        extremal.push(jk_bound_check(&flat, depth)?);
    }
    Ok(JkSuite {
        extremal,
        sub_extremal,
        collapse_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSlowSummary {
    pub big_a: f64,
    pub a: f64,
    pub b: f64,
    pub continuity_residual: f64,
    pub decay_ode_slack: f64,
    pub decay_floor_slack: f64,
    pub tanh_slack: f64,
    /// `max φ - 2b/a` over the samples.
    pub max_over_ceiling: f64,
    pub ceiling: f64,
    /// Curvature summand of the slow global bound at the same `K, Λ_max`.
    pub curvature_term: f64,
    pub pass: bool,
}

/// Builds the slow auxiliary function for `(params, α, K, Λ_max)` and checks
/// its properties on `samples` log-spaced times per branch.
pub fn phi_slow_summary(
    params: &DiffusionParams,
    alpha: f64,
    curvature_bound: f64,
    lambda_max: f64,
    samples: usize,
) -> RunResult<Option<PhiSlowSummary>> {
    let consts = params.slow_constants(alpha)?;
    let (big_a, a, b) = consts.phi_parameters(curvature_bound, lambda_max);
    let glued = match PhiSlow::build(big_a, a, b)? {
        PhiSlow::Zero => return Ok(None),
        PhiSlow::Glued(g) => g,
    };
    let ts = glued.t_switch;
    let mut times = log_samples(ts * 1e-6, ts * (1.0 - 1e-9), samples);
    times.extend(log_samples(ts * (1.0 + 1e-9), ts * 1e6, samples));
    let check = check_phi_slow(&glued, &times);
    Ok(Some(PhiSlowSummary {
        big_a,
        a,
        b,
        continuity_residual: glued.continuity_residual(),
        decay_ode_slack: check.decay_ode_slack,
        decay_floor_slack: check.decay_floor_slack,
        tanh_slack: check.tanh_slack,
        max_over_ceiling: check.max_over_ceiling,
        ceiling: PhiSlow::Glued(glued).ceiling(),
        curvature_term: consts.curvature_term(curvature_bound, lambda_max),
        pass: check.pass && glued.continuity_residual() <= 1e-12,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiFastSummary {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub max_value: f64,
    pub ceiling: f64,
    pub pass: bool,
}

pub fn phi_fast_summary(
    params: &DiffusionParams,
    alpha: f64,
    curvature_bound: f64,
    lambda_max: f64,
    samples: usize,
) -> RunResult<PhiFastSummary> {
    let fc = params.fast_constants_default(alpha)?;
    let (a, b) = fc.phi_coefficients(curvature_bound, lambda_max);
    let phi = PhiFast::build(a, b, 1.0)?;
    Ok(fast_summary(&phi, samples))
}

pub fn fast_summary(phi: &PhiFast, samples: usize) -> PhiFastSummary {
    let times: Vec<f64> = (0..samples).map(|i| 1e3 * i as f64 / (samples - 1) as f64).collect();
    let residual = phi.residual(&times);
    let max_value = times.iter().map(|&t| phi.value(t)).fold(0.0, f64::max);
    PhiFastSummary {
        a: phi.a,
        b: phi.b,
        residual,
        max_value,
        ceiling: phi.ceiling(),
        pass: residual <= 1e-12 && max_value <= phi.ceiling() * (1.0 + 1e-15),
    }
}

/// Diagnostic rows for the auxiliary function of the scenario's regime.
pub fn phi_rows(
    params: &DiffusionParams,
    alpha: f64,
    curvature_bound: f64,
    lambda_max: f64,
    samples: usize,
    base: &DiagnosticRow,
) -> RunResult<Vec<DiagnosticRow>> {
    let row = |name: String, lhs: f64, rhs: f64, slack: f64, pass: bool| DiagnosticRow {
        check_name: name,
        lhs,
        rhs,
        slack,
        verdict: verdict(pass),
        ..base.clone()
    };
    let mut rows = Vec::new();
    match params.regime() {
        Regime::Slow => match phi_slow_summary(params, alpha, curvature_bound, lambda_max, samples)? {
            None => rows.push(row(format!("phi_slow_zero(alpha={alpha})"), 0.0, 0.0, 0.0, true)),
            Some(s) => {
                rows.push(row(
                    format!("phi_slow_continuity(alpha={alpha})"),
                    s.continuity_residual,
                    1e-12,
                    1e-12 - s.continuity_residual,
                    s.continuity_residual <= 1e-12,
                ));
                rows.push(row(
                    format!("phi_slow_decay_branch(alpha={alpha})"),
                    s.decay_ode_slack.min(s.decay_floor_slack),
                    -1e-10,
                    s.decay_ode_slack.min(s.decay_floor_slack) + 1e-10,
                    s.decay_ode_slack >= -1e-10 && s.decay_floor_slack >= -1e-12,
                ));
                rows.push(row(
                    format!("phi_slow_tanh_branch(alpha={alpha})"),
                    s.tanh_slack,
                    -1e-10,
                    s.tanh_slack + 1e-10,
                    s.tanh_slack >= -1e-10,
                ));
                rows.push(row(
                    format!("phi_slow_ceiling(alpha={alpha})"),
                    s.max_over_ceiling + s.ceiling,
                    s.ceiling,
                    -s.max_over_ceiling,
                    s.max_over_ceiling <= 1e-12 * s.ceiling,
                ));
                // the ceiling equals the curvature summand times 1/(p-1)
                let scaled = s.ceiling * (params.p - 1.0);
                let gap = (scaled - s.curvature_term).abs() / s.curvature_term;
                rows.push(row(
                    format!("phi_slow_ceiling_vs_curvature_term(alpha={alpha})"),
                    scaled,
                    s.curvature_term,
                    -gap,
                    gap <= 1e-12,
                ));
            }
        },
        Regime::Fast => {
            let s = phi_fast_summary(params, alpha, curvature_bound, lambda_max, samples)?;
            rows.push(row(
                format!("phi_fast_residual(alpha={alpha})"),
                s.residual,
                1e-12,
                1e-12 - s.residual,
                s.residual <= 1e-12,
            ));
            rows.push(row(
                format!("phi_fast_ceiling(alpha={alpha})"),
                s.max_value,
                s.ceiling,
                s.ceiling - s.max_value,
                s.max_value <= s.ceiling * (1.0 + 1e-15),
            ));
        }
        _ => {}
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub scenario_id: String,
    pub cells: usize,
    pub error: f64,
    /// Order between this resolution and the previous one.
    pub order: Option<f64>,
    /// Least-squares slope of `-ln(error)` against `ln(cells)` over all rows.
    pub fitted_order: f64,
    pub steps: u64,
}

/// Least-squares slope of `ln e` against `-ln m`.
pub fn fitted_order(cells: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = cells.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -cov / var
}

/// Relative L∞ error against the closed form at `at_time` for each resolution.
pub fn convergence_study(scenario: &Scenario, cells: &[usize], at_time: f64) -> RunResult<Vec<ConvergenceRow>> {
    let exact = scenario
        .exact_solution()?
        .expect("validated: convergence needs a closed form");
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cells.len());
    for &m in cells {
        let problem = scenario.problem(m, vec![scenario.time.start, at_time])?;
        let traj = solve(&problem)?;
        let last = traj.u.last().unwrap();
        let nodes = traj.grid.nodes();
        let reference: Vec<f64> = nodes.iter().map(|&r| exact.eval(r, at_time)).collect();
        let peak = reference.iter().cloned().fold(0.0, f64::max);
        let error = last
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / peak;
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (m as f64 / prev.cells as f64).ln());
        rows.push(ConvergenceRow {
            scenario_id: scenario.id.clone(),
            cells: m,
            error,
            order,
            fitted_order: f64::NAN,
            steps: traj.steps,
        });
    }
    let fit = fitted_order(
        &rows.iter().map(|r| r.cells).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    for r in &mut rows {
        r.fitted_order = fit;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiYauRow {
    pub scenario_id: String,
    pub t: f64,
    pub r: f64,
    /// `|∇u|²/u² - ∂_t u/u` from the closed-form log-derivatives.
    pub exact_quantity: f64,
    /// Same quantity from the computed trajectory.
    pub computed_quantity: f64,
    pub n_over_2t: f64,
}

/// Largest deviation of the closed-form quantity from `n/(2t)`.
pub fn liyau_equality_gap(n: usize, times: &[f64], radii: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &t in times {
        for &r in radii {
            let q = heat_kernel_harnack(n, r, t, 1.0);
            worst = worst.max((q - n as f64 / (2.0 * t)).abs());
        }
    }
    worst
}

/// Slow constants at one value of `δ`, next to the leading coefficient of
/// the smooth-solution bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub q: f64,
    pub big_c0: f64,
    pub big_c1_over_c1: f64,
    /// `α²nδ/(nδ+2)`.
    pub reference_leading: f64,
    pub ratio: f64,
}

/// Slow constants along `q = (1+δ)/(p-1)` at fixed `p, n, α`.
pub fn delta_sweep(p: f64, n: usize, alpha: f64, deltas: &[f64]) -> RunResult<Vec<DeltaRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let q = (1.0 + delta) / (p - 1.0);
            let c = DiffusionParams::new(p, q, n)?.slow_constants(alpha)?;
            let nd = n as f64 * c.delta;
            let reference = alpha * alpha * nd / (nd + 2.0);
            Ok(DeltaRow {
                delta: c.delta,
                q,
                big_c0: c.big_c0,
                big_c1_over_c1: c.big_c1 / c.c1,
                reference_leading: reference,
                ratio: c.big_c0 / reference,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_suite_is_seeded() {
        let a = jk_random_suite(3, 10, 25).unwrap();
        let b = jk_random_suite(3, 10, 25).unwrap();
        assert_eq!(a, b);
        assert!(a.pass(), "{}", a.min_log_slack());
        assert!(a.extremal_tight());
    }

    #[test]
    fn order_fit() {
        let cells = [100, 200, 400];
        let errs = [1e-2, 2.5e-3, 6.25e-4];
        assert!((fitted_order(&cells, &errs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fast_phi_summary() {
        let s = fast_summary(&PhiFast::build(1.0, 1.0, 1.0).unwrap(), 1000);
        assert!(s.pass && s.residual < 1e-15);
    }

    #[test]
    fn heat_equality() {
        assert!(liyau_equality_gap(2, &[0.5, 1.0, 2.0], &[0.0, 0.3, 1.7]) < 1e-12);
    }
}
