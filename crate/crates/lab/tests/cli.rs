use std::path::Path;
use std::process::{Command, Output};

use leibenson_lab::shipped;

fn leibenson(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leibenson"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("LEIBENSON_OUT")
        .env_remove("LEIBENSON_WORKERS")
        .output()
        .expect("binary runs")
}

fn shipped_toml(name: &str) -> String {
    shipped::shipped(name).unwrap().unwrap().to_toml()
}

#[test]
fn list_prints_every_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = leibenson(dir.path(), &["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), shipped::names().collect::<Vec<_>>());
}

#[test]
fn bad_exponent_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    let text = shipped_toml("hyperbolic-bump-slow-n2").replacen("p = 2.0", "p = 1.0", 1);
    assert!(text.contains("p = 1.0"));
    std::fs::write(&file, text).unwrap();
    let out = leibenson(&dir.path().join("runs"), &["solve", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("params.p"), "{err}");
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("typo.toml");
    let text = shipped_toml("hyperbolic-bump-slow-n2").replacen("[grid]\n", "[grid]\ncels = 12\n", 1);
    std::fs::write(&file, text).unwrap();
    let out = leibenson(&dir.path().join("runs"), &["run", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn missing_scenario_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = leibenson(dir.path(), &["run", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn plot_of_an_empty_run_is_distinct_from_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = leibenson(dir.path(), &["plot", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn certify_writes_reports_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = leibenson(dir.path(), &["certify", "hyperbolic-bump-slow-n2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("hyperbolic-bump-slow-n2");
    for f in ["manifest.json", "certificates.csv", "snapshots.csv", "plots/a_slow_global_alpha2.svg"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    let report = leibenson(dir.path(), &["report", run.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8(report.stdout).unwrap().contains("slow_global"));
}

#[test]
fn constants_and_phi_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = leibenson(dir.path(), &["constants", "--p", "2", "--q", "2", "--n", "3", "--alpha", "2"]);
    assert!(out.status.success());
    let c: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(c["big_c0"].as_f64().unwrap() > 0.0);
    let sweep = leibenson(dir.path(), &["constants", "--p", "2", "--q", "2", "--n", "3", "--alpha", "2", "--delta-sweep"]);
    assert_eq!(String::from_utf8(sweep.stdout).unwrap().lines().count(), 42);
    let phi = leibenson(
        dir.path(),
        &["phi-check", "--regime", "slow", "--p", "2", "--q", "2", "--n", "3", "--alpha", "2"],
    );
    assert_eq!(phi.status.code(), Some(0));
    let bad = leibenson(dir.path(), &["constants", "--p", "0.5", "--q", "2", "--n", "3", "--alpha", "2"]);
    assert_eq!(bad.status.code(), Some(4));
}
