use proptest::prelude::*;

use leibenson::certify::{
    cylinder_mask, f_alpha, optimize_eps, slow_ball_bound, slow_global_bound, sup_f_alpha, Calibration, CylinderSpec,
    FEASIBILITY_SLACK,
};
use leibenson::diagnostics::{iteration_schedule, jk_bound_check, jk_check_sequence, JkParams};
use leibenson::exact::calibrate_profile;
use leibenson::phi::{check_phi_slow, log_samples, PhiFast, PhiSlow};
use leibenson::solver::{solve, Boundary, Positivity, Problem, RadialGrid, RadialSolver, RadialTrajectory, SolverConfig};
use leibenson::{DiffusionParams, ModelManifold, Regime};

fn slow_params() -> impl Strategy<Value = DiffusionParams> {
    (1.2f64..4.0, -2.0f64..1.0, 1usize..=5)
        .prop_map(|(p, log_delta, n)| DiffusionParams::new(p, (1.0 + 10f64.powf(log_delta)) / (p - 1.0), n).unwrap())
}

fn fast_params() -> impl Strategy<Value = DiffusionParams> {
    (1.1f64..3.0, 0.01f64..0.99, 1usize..=5).prop_map(|(p, share, n)| {
        let gap = share * (p / n as f64).min(1.0);
        DiffusionParams::new(p, (1.0 - gap) / (p - 1.0), n).unwrap()
    })
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regimes_partition(p in 1.05f64..4.0, q in 0.05f64..4.0, n in 1usize..=6) {
        let params = DiffusionParams::new(p, q, n).unwrap();
        prop_assert_eq!(params.delta(), -params.fast_gap());
        let expected = if params.delta().abs() <= 1e-12 {
            Regime::Borderline
        } else if params.delta() > 0.0 {
            Regime::Slow
        } else if p - n as f64 * params.fast_gap() > 0.0 {
            Regime::Fast
        } else {
            Regime::FastInvalid
        };
        prop_assert_eq!(params.regime(), expected);
        prop_assert!(params.a_p() > 0.0 && params.a_p() <= 1.0);
    }

    #[test]
    fn pressure_round_trip(params in prop_oneof![slow_params(), fast_params()], u in log_range(1e-3, 1e3)) {
        let v = params.pressure(u).unwrap();
        prop_assert!(v > 0.0);
        let back = params.pressure_inverse(v).unwrap();
        prop_assert!((back - u).abs() <= 1e-12 * u);
        let w = params.pressure(u * 1.01).unwrap();
        match params.regime() {
            Regime::Slow => prop_assert!(w > v),
            _ => prop_assert!(w < v),
        }
    }

    #[test]
    fn slow_constants_identity(params in slow_params(), alpha in 1.01f64..4.0) {
        let c = params.slow_constants(alpha).unwrap();
        prop_assert!((c.big_c1 / c.c1 - c.big_c0).abs() <= 1e-12 * c.big_c0);
        for v in [c.c0, c.c1, c.c2, c.c3, c.cn, c.cdelta, c.big_c0, c.big_c1, c.lambda_min_admissible] {
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn fast_witness_and_default_slack(params in fast_params(), alpha in 0.02f64..0.98) {
        let fc = params.fast_constants_default(alpha).unwrap();
        let d = fc.discriminant();
        prop_assert!(d > 0.0);
        prop_assert!((d - fc.discriminant_closed_form()).abs() <= 1e-9 * d.abs().max(1.0));
        prop_assert!(fc.check_slack(fc.slack).is_ok());
        prop_assert!(fc.feasibility_margins(fc.slack).iter().all(|&m| m > 0.0));
    }

    #[test]
    fn optimized_bound_never_worse(
        params in fast_params(),
        alpha in 0.05f64..0.95,
        t in log_range(1e-2, 1e2),
        k in prop_oneof![Just(0.0), log_range(1e-2, 10.0)],
        lmax in log_range(1e-2, 10.0),
    ) {
        let opt = optimize_eps(&params, alpha, t, k, lmax).unwrap();
        prop_assert!(opt.bound <= opt.default_bound);
        let fc = params.fast_constants_default(alpha).unwrap();
        prop_assert!(fc.feasibility_margins(opt.slack).iter().all(|&m| m >= FEASIBILITY_SLACK));
        prop_assert!(opt.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(optimize_eps(&params, alpha, t, k, lmax).unwrap(), opt);
    }

    #[test]
    fn slow_phi_properties(
        params in slow_params(),
        alpha in 1.05f64..3.0,
        k in log_range(1e-2, 10.0),
        lmax in log_range(1e-2, 10.0),
    ) {
        let c = params.slow_constants(alpha).unwrap();
        let (big_a, a, b) = c.phi_parameters(k, lmax);
        let PhiSlow::Glued(g) = PhiSlow::build(big_a, a, b).unwrap() else {
            return Err(TestCaseError::fail("positive curvature must glue"));
        };
        prop_assert!(g.continuity_residual() <= 1e-12);
        let ts = g.t_switch;
        let mut times = log_samples(ts * 1e-6, ts * (1.0 - 1e-9), 1000);
        times.extend(log_samples(ts * (1.0 + 1e-9), ts * 1e6, 1000));
        let check = check_phi_slow(&g, &times);
        prop_assert!(check.pass, "{check:?}");
        let ceiling = 2.0 * b / a;
        prop_assert!(((params.p - 1.0) * ceiling - c.curvature_term(k, lmax)).abs() <= 1e-12 * c.curvature_term(k, lmax));
    }

    #[test]
    fn fast_phi_properties(a in log_range(1e-3, 1e3), b in log_range(1e-3, 1e3), shift in 0.1f64..3.0) {
        let phi = PhiFast::build(a, b, shift).unwrap();
        let times: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        prop_assert!(phi.residual(&times) <= 1e-12);
        let mut last = 0.0;
        for &t in &times {
            let v = phi.value(t);
            prop_assert!(v <= phi.ceiling() && v >= last);
            last = v;
        }
    }

    #[test]
    fn ball_bound_approaches_global(
        params in slow_params(),
        alpha in 1.05f64..3.0,
        t in log_range(0.1, 10.0),
        k in log_range(0.1, 10.0),
        lmax in log_range(0.1, 10.0),
        lmin_share in log_range(1e-3, 1.0),
    ) {
        let c = params.slow_constants(alpha).unwrap();
        let calib = Calibration::default();
        let global = slow_global_bound(&c, t, k, lmax);
        let gap = |r: f64| (slow_ball_bound(&c, t, k, r, lmin_share * lmax, lmax, &calib) - global).abs() / global;
        // the deviation decays like 1/R once R is large
        let (g1, g2) = (gap(1e8), gap(1e10));
        prop_assert!(g2 < 1e-6 && g1 / g2 > 50.0, "{g1:e} {g2:e}");
    }

    #[test]
    fn ball_bound_decreases_in_radius(
        params in slow_params(),
        alpha in 1.05f64..3.0,
        t in log_range(0.1, 10.0),
        k in prop_oneof![Just(0.0), log_range(0.1, 10.0)],
        lmin in log_range(1e-3, 1.0),
        lmax_share in log_range(1.0, 10.0),
    ) {
        // with Λ_min ≤ C the prefactor base C t (1/t + ...) / Λ_min stays above one
        let c = params.slow_constants(alpha).unwrap();
        let calib = Calibration::default();
        let values: Vec<f64> = (0..40)
            .map(|i| slow_ball_bound(&c, t, k, 10f64.powf(-1.0 + 0.25 * i as f64), lmin, lmin * lmax_share, &calib))
            .collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
    }

    #[test]
    fn recursion_bound_holds(
        a in log_range(1e-3, 1e3),
        theta in log_range(1e-3, 1e3),
        omega in 0.1f64..2.0,
        j0 in log_range(1e-6, 1e6),
        shrink in prop::collection::vec(log_range(0.05, 1.0), 25),
    ) {
        let params = JkParams { a, theta, omega, j0 };
        let extremal = jk_bound_check(&params, 25).unwrap();
        prop_assert!(extremal.pass && extremal.max_abs_log_slack <= 1e-9);
        let logs: Vec<f64> = shrink.iter().map(|s| s.ln()).collect();
        prop_assert!(jk_check_sequence(&params, 25, &logs).unwrap().pass);
    }

    #[test]
    fn schedule_is_dyadic(radius in log_range(1e-2, 1e2), horizon in log_range(1e-2, 1e2), depth in 1usize..=50) {
        let steps = iteration_schedule(radius, horizon, 2.0, 0.5, depth).unwrap();
        for w in steps.windows(2) {
            let k = w[0].k as i32;
            prop_assert_eq!(w[0].radius_fraction - w[1].radius_fraction, 0.5f64.powi(k + 2));
            prop_assert_eq!(w[1].time_fraction - w[0].time_fraction, 0.5f64.powi(k + 1));
            prop_assert!(w[1].radius < w[0].radius && w[1].start_time > w[0].start_time);
        }
    }
}

fn barenblatt(cells: usize) -> RadialTrajectory {
    let params = DiffusionParams::new(2.0, 2.0, 3).unwrap();
    let prof = calibrate_profile(params, 1.0).unwrap();
    let grid = RadialGrid::new(2.5, cells).unwrap();
    let times = (0..21).map(|i| 1.0 + i as f64 / 20.0).collect();
    RadialTrajectory::from_exact(ModelManifold::euclidean(3).unwrap(), params, grid, times, move |r, t| prof.eval(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enlarging_cylinder_never_lowers_sup(
        f_small in 0.2f64..1.0,
        f_extra in 0.0f64..1.0,
        t1 in 1.0f64..1.5,
        t_span in 0.1f64..0.5,
        widen in 0.0f64..0.5,
        alpha in 1.05f64..3.0,
        bound in 0.0f64..3.0,
    ) {
        let traj = barenblatt(64);
        let fields = traj.derived().unwrap();
        let small = CylinderSpec::new(f_small, t1, t1 + t_span).unwrap();
        let large = CylinderSpec::new(f_small + f_extra * (1.0 - f_small), (t1 - widen).max(1.0), t1 + t_span + widen).unwrap();
        let ms = cylinder_mask(&traj, &small, 1e-3);
        let ml = cylinder_mask(&traj, &large, 1e-3);
        prop_assume!(ms.count() > 0);
        let (ss, sl) = (sup_f_alpha(&traj, &fields, &ms, alpha).unwrap(), sup_f_alpha(&traj, &fields, &ml, alpha).unwrap());
        prop_assert!(sl >= ss);
        // a fixed bound that fails on the small cylinder fails on the large one
        prop_assert!(!(ss > bound && sl <= bound));
    }

    #[test]
    fn sup_decreases_in_alpha_where_z_is_nonnegative(
        fraction in 0.1f64..1.0,
        t1 in 1.0f64..1.8,
        alpha1 in 1.05f64..3.0,
        step in 0.0f64..2.0,
    ) {
        let traj = barenblatt(64);
        let fields = traj.derived().unwrap();
        let mask = cylinder_mask(&traj, &CylinderSpec::new(fraction, t1, 2.0).unwrap(), 1e-3);
        prop_assume!(mask.count() > 0);
        let regime = traj.params.regime();
        let alpha2 = alpha1 + step;
        for (k, row) in mask.mask.iter().enumerate() {
            for (i, _) in row.iter().enumerate().filter(|(_, &on)| on) {
                let (y, z) = (fields.y[k][i], fields.z[k][i]);
                if z >= 0.0 {
                    prop_assert!(f_alpha(regime, alpha1, y, z) >= f_alpha(regime, alpha2, y, z));
                }
            }
        }
        let min_z = mask
            .mask
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().filter(|(_, &on)| on).map(move |(i, _)| (k, i)))
            .map(|(k, i)| fields.z[k][i])
            .fold(f64::INFINITY, f64::min);
        if min_z >= 0.0 {
            prop_assert!(sup_f_alpha(&traj, &fields, &mask, alpha1).unwrap() >= sup_f_alpha(&traj, &fields, &mask, alpha2).unwrap());
        }
    }
}

fn bump_problem(initial: Vec<f64>, grid: RadialGrid, curvature: f64) -> Problem {
    Problem {
        manifold: ModelManifold::new(2, curvature).unwrap(),
        params: DiffusionParams::new(2.0, 1.5, 2).unwrap(),
        grid,
        config: SolverConfig {
            positivity: Positivity::Abort { floor: 1e-6 },
            ..SolverConfig::default()
        },
        boundary: Boundary::ZeroFlux,
        initial,
        snapshot_times: vec![0.0, 0.05, 0.1],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comparison_principle_and_mass(
        amp in 0.1f64..2.0,
        width in 0.2f64..1.0,
        lower_share in 0.0f64..1.0,
        curvature in prop_oneof![Just(0.0), 0.1f64..1.0],
    ) {
        let grid = RadialGrid::new(2.0, 32).unwrap();
        let upper: Vec<f64> = grid.nodes().iter().map(|r| 0.2 + amp * (-(r * r) / (width * width)).exp()).collect();
        let lower: Vec<f64> = upper.iter().map(|&u| 0.2 + lower_share * (u - 0.2)).collect();
        let hi = solve(&bump_problem(upper.clone(), grid, curvature)).unwrap();
        let lo = solve(&bump_problem(lower, grid, curvature)).unwrap();
        for (a, b) in hi.u.iter().zip(&lo.u) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| *x >= y - 1e-8));
        }
        let pb = bump_problem(upper, grid, curvature);
        let mut solver = RadialSolver::new(pb.manifold, pb.params, grid, pb.config, Boundary::ZeroFlux, 0.0, pb.initial).unwrap();
        let m0 = solver.discrete_mass();
        solver.advance_to(0.1).unwrap();
        prop_assert!(((solver.discrete_mass() - m0) / m0).abs() <= 1e-8);
        prop_assert_eq!(hi.derived().unwrap(), hi.derived().unwrap());
    }
}
