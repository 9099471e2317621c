use leibenson::exact::calibrate_profile;
use leibenson::solver::{solve, Boundary, Positivity, Problem, RadialGrid, SolverConfig};
use leibenson::{DiffusionParams, ModelManifold};

const RESOLUTIONS: [usize; 3] = [128, 256, 512];

/// Relative L∞ error at `t = 2` of a run started from the profile at `t = 1`.
fn relative_error(p: f64, q: f64, n: usize, cells: usize) -> f64 {
    let params = DiffusionParams::new(p, q, n).unwrap();
    let prof = calibrate_profile(params, 1.0).unwrap();
    let radius = 1.25 * prof.support_radius(2.0);
    let grid = RadialGrid::new(radius, cells).unwrap();
    let initial: Vec<f64> = grid.nodes().iter().map(|&r| prof.eval(r, 1.0)).collect();
    let top = initial.iter().cloned().fold(0.0, f64::max);
    let problem = Problem {
        manifold: ModelManifold::euclidean(n).unwrap(),
        params,
        grid,
        config: SolverConfig {
            positivity: Positivity::Clip { floor: 1e-12 * top },
            ..SolverConfig::default()
        },
        boundary: Boundary::ZeroFlux,
        initial,
        snapshot_times: vec![1.0, 2.0],
    };
    let traj = solve(&problem).unwrap();
    let exact: Vec<f64> = grid.nodes().iter().map(|&r| prof.eval(r, 2.0)).collect();
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    let worst = traj.u[1].iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    worst / peak
}

/// Least-squares slope of `-ln e` against `ln m`.
fn observed_order(errors: &[f64]) -> f64 {
    let xs: Vec<f64> = RESOLUTIONS.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -cov / var
}

fn check(p: f64, q: f64, n: usize) {
    let errors: Vec<f64> = RESOLUTIONS.iter().map(|&m| relative_error(p, q, n, m)).collect();
    assert!(errors[2] <= 0.02, "p={p} q={q} n={n}: error {:e} at m=512", errors[2]);
    let order = observed_order(&errors);
    assert!(order >= 0.8, "p={p} q={q} n={n}: order {order} from {errors:?}");
}

#[test]
fn porous_medium_line() {
    check(2.0, 2.0, 1);
}

#[test]
fn porous_medium_space() {
    check(2.0, 2.0, 3);
}

#[test]
fn p_laplacian_plane() {
    check(3.0, 1.0, 2);
}
