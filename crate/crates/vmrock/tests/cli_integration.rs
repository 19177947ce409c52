//! Black-box checks of the command-line binary: exit codes and output files.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vmrock"))
}

fn chain_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/planar3.chain")
        .display()
        .to_string()
}

fn write_scenario(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("case.scn");
    std::fs::write(&path, body).unwrap();
    path
}

fn minimal_scenario(extra_env: &str, duration: f64) -> String {
    format!(
        "[plant]\nchain = {}\nq0 = 1.2 -1.0 -0.4\n\n[controller]\n\n[environment]\nknife = knife1\n{extra_env}\n[run]\nduration = {duration}\ndt = 0.001\nseed = 0\n",
        chain_path()
    )
}

#[test]
fn zero_duration_run_succeeds_with_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &minimal_scenario("", 0.0));
    let out = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1, "expected a lone header line");
    assert!(out.join("energy.csv").exists());
    assert!(out.join("report.txt").exists());
}

#[test]
fn unknown_knife_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = minimal_scenario("", 1.0).replace("knife = knife1", "knife = knife9");
    let scn = write_scenario(dir.path(), &body);
    let status = bin()
        .args(["simulate", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_with_no_values_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &minimal_scenario("", 1.0));
    let status = bin()
        .args(["sweep", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--axis", "board_height", "--values", ""])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_unknown_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &minimal_scenario("", 1.0));
    let status = bin()
        .args(["sweep", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--axis", "gravity", "--values", "1,2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_writes_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &minimal_scenario("", 5.0));
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(&out)
        .args(["--axis", "board_height", "--values", "0,0.01"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("board_height_0/trace.csv").exists());
    assert!(out.join("board_height_0.01/trace.csv").exists());
}

#[test]
fn toy_writes_phase_plane_and_section_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["toy", "--ic=0.5,0", "--ic=-1.5,1", "--duration", "20"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("toy_ic0.csv")).unwrap();
    assert!(csv.starts_with("t,x,xdot,r,E\n"));
    assert!(out.join("toy_ic1.csv").exists());
    let summary = std::fs::read_to_string(out.join("poincare.txt")).unwrap();
    assert!(summary.contains("converged"));
}

#[test]
fn toy_rejects_malformed_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["toy", "--ic", "nope"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn metrics_recomputes_from_existing_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &minimal_scenario("", 8.0));
    let out = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--scenario"])
        .arg(&scn)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let out2 = dir.path().join("out2");
    let status = bin()
        .args(["metrics", "--trace"])
        .arg(out.join("trace.csv"))
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let a = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let b = std::fs::read_to_string(out2.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "offline recomputation drifted from the live metrics");
}

#[test]
fn help_exits_zero() {
    let status = bin().arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}
