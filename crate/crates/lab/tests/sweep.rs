use leibenson::certify::BoundName;
use leibenson_lab::scenario::Scenario;
use leibenson_lab::shipped;
use leibenson_lab::sweep::{run_sweep, Axis};
use leibenson_lab::Status;

/// Coarse porous-medium source with a single ball certificate.
fn ball_template() -> Scenario {
    let mut s = shipped::shipped("barenblatt-slow-n3").unwrap().unwrap();
    s.grid.cells = 128;
    s.time.snapshots = 11;
    s.certify.retain(|c| c.bound == BoundName::SlowBall);
    s.certify[0].fraction_r = 1.0;
    s.diagnostics = Default::default();
    s.validation = None;
    s
}

#[test]
fn ball_bound_falls_along_the_radius_axis() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_sweep(&ball_template(), Axis::Radius, &[3.6, 2.4, 3.0], dir.path(), 2).unwrap();
    assert!(outcome.dir.join("sweep.csv").exists());
    assert!(outcome.dir.join("plots/d_margin_vs_R.svg").exists());
    let values: Vec<f64> = outcome.rows.iter().map(|r| r.value).collect();
    assert_eq!(values, vec![2.4, 3.0, 3.6]);
    let bounds: Vec<f64> = outcome.rows.iter().map(|r| r.bound.unwrap()).collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
    assert_eq!(outcome.status(), Status::Pass);
}

#[test]
fn resolution_axis_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let mut template = shipped::shipped("barenblatt-slow-n1").unwrap().unwrap();
    template.diagnostics = Default::default();
    template.validation = None;
    let outcome = run_sweep(&template, Axis::Cells, &[128.0, 256.0, 512.0], dir.path(), 1).unwrap();
    let first = &outcome.rows[0];
    assert!(first.order.is_none() && first.solution_error.is_some());
    for r in &outcome.rows[outcome.rows.len() / 3..] {
        let order = r.order.expect("order after the first resolution");
        assert!(order > 0.3, "{order}");
    }
}

#[test]
fn failing_points_do_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut template = ball_template();
    template.certify[0].bound = BoundName::SlowGlobal;
    let outcome = run_sweep(&template, Axis::P, &[0.5, 2.0], dir.path(), 1).unwrap();
    assert_eq!(outcome.rows[0].verdict, "error");
    assert!(outcome.rows[0].error.contains("p"));
    assert_eq!(outcome.rows[1].verdict, "pass");
    assert_eq!(outcome.status(), Status::Fail);
}

#[test]
fn unknown_axis_is_rejected() {
    assert!("theta".parse::<Axis>().unwrap_err().is_config());
}
