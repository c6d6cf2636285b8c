use std::path::Path;
use std::process::{Command, Output};

fn dtproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtproj")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn integrate_writes_csv_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("traj.csv");
    std::fs::write(&cfg, "# Kepler, projected RK4\nmethod=RK4Proj13\nh=0.2\nsteps=500\n").unwrap();
    let o = dtproj(&["integrate", "--config", path(&cfg), "--out", path(&out), "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 502);
    assert!(csv.starts_with("step,t,y1,y2,y3,y4,dev_H1,dev_H3,solver_iters\n"));
    let meta = std::fs::read_to_string(dir.path().join("traj.csv.meta")).unwrap();
    assert!(meta.contains("status=complete"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS"));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "method=RK4Proj1\nsteps=500\n").unwrap();
    let o = dtproj(&["integrate", "-c", path(&cfg), "--steps", "3", "--set", "invariants=1,2"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "step,t,y1,y2,y3,y4,dev_H1,dev_H2,solver_iters");
    assert_eq!(lines.count(), 4);
}

#[test]
fn output_is_reproducible() {
    let a = dtproj(&["integrate", "--method", "RK4Proj123", "--steps", "40"]);
    let b = dtproj(&["integrate", "--method", "RK4Proj123", "--steps", "40"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        &["integrate", "--h", "-1"][..],
        &["integrate", "--invariants", "9"],
        &["integrate", "--method", "teleport"],
        &["integrate", "--set", "colour=red"],
        &["integrate", "--config", "/nonexistent/run.cfg"],
        &["integrate", "--method", "scheme_b", "--tableau", "/nonexistent/tableau.txt"],
        &["order-study", "--h-list", "0.1,0.05"],
    ] {
        let o = dtproj(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn solver_failure_exits_with_1_and_marks_the_run_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail.csv");
    let o = dtproj(&["integrate", "--method", "RK4Proj123", "--tol-solver", "1e-30", "--out", path(&out)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = std::fs::read_to_string(dir.path().join("fail.csv.meta")).unwrap();
    assert!(meta.contains("status=incomplete"));
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("step,"));
}

#[test]
fn failed_check_exits_with_3() {
    // a loose solver tolerance leaves drift well above the conservation bound
    let o = dtproj(&["integrate", "--method", "RK4Proj1", "--tol-solver", "1e-4", "--steps", "200", "--check"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn order_study_reports_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("order.csv");
    let o = dtproj(&["order-study", "--method", "RK4Proj123", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("h,error\n"));
    assert_eq!(text.lines().count(), 6);
    let slope: f64 = text.lines().last().unwrap().strip_prefix("slope=").unwrap().parse().unwrap();
    assert!((slope - 4.0).abs() < 0.3, "{slope}");
}

#[test]
fn compare_reports_both_methods() {
    let o = dtproj(&["compare", "--method", "scheme_a", "--invariants", "1,2", "--h", "0.1", "--steps", "200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("method=scheme_a"));
    assert!(text.contains("method=standard_orthogonal"));
    assert!(text.contains("tableau=implicit_midpoint"));
    assert_eq!(text.matches("solver_iterations=").count(), 2);
    assert!(text.contains("same_variant=false"));
}

#[test]
fn compare_rejects_mismatched_slots() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("std.cfg");
    std::fs::write(&other, "method=standard\ninvariants=1\n").unwrap();
    let o = dtproj(&["compare", "--invariants", "1,2", "--against", path(&other)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn property_suite_passes() {
    let o = dtproj(&["check", "--quick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
