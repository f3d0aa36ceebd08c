mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{data_path, garver};
use rtnep::recourse::solve_dispatch;
use rtnep::{ExpansionPlan, Realization};
use serde_json::Value;

fn rtnep(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtnep"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn case_arg() -> String {
    data_path("garver6.json").display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn nominal_cost() -> f64 {
    let c = garver();
    solve_dispatch(&c, &ExpansionPlan::empty(&c), &Realization::nominal(&c))
        .unwrap()
        .operating_cost
}

#[test]
fn solve_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let out = rtnep(&["solve", "--case", &case, "--gamma-d", "0", "--gamma-g", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["plan.json", "worst.json", "log.csv", "log.json", "manifest.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["termination"], "converged");
    assert_eq!(m["case_sha256"].as_str().unwrap().len(), 64);
    let w = json(&dir.path().join("worst.json"));
    for l in w["realization"]["loads"].as_array().unwrap() {
        assert_eq!(l["deviated"], false);
    }
}

#[test]
fn missing_case_argument_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = rtnep(&["solve", "--gamma-d", "0", "--gamma-g", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = rtnep(
        &["solve", "--case", "/nonexistent/case.json", "--gamma-d", "0", "--gamma-g", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let case = case_arg();
    let args = ["solve", "--case", &case, "--gamma-d", "2", "--gamma-g", "1", "--multistart", "4", "--seed", "7"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(rtnep(&args, a.path()).status.code(), Some(0));
    assert_eq!(rtnep(&args, b.path()).status.code(), Some(0));
    for name in ["plan.json", "worst.json", "log.csv", "log.json", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn assess_after_solve_finds_no_exceedances() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let solve = rtnep(
        &["solve", "--case", &case, "--gamma-d", "1", "--gamma-g", "1", "--multistart", "10"],
        dir.path(),
    );
    assert_eq!(solve.status.code(), Some(0));
    let plan = dir.path().join("plan.json").display().to_string();
    let assessed = tempfile::tempdir().unwrap();
    let out = rtnep(
        &[
            "assess", "--case", &case, "--gamma-d", "1", "--gamma-g", "1", "--plan", &plan, "--samples", "100",
            "--seed", "3", "--mode", "exact",
        ],
        assessed.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&assessed.path().join("assess_summary.json"));
    assert_eq!(s["exceedances"], 0);
    assert_eq!(s["samples"], 100);
    let rows = fs::read_to_string(assessed.path().join("assess.csv")).unwrap();
    assert_eq!(rows.lines().count(), 101);
    assert!(assessed.path().join("assess_histogram.csv").is_file());
    assert_eq!(json(&assessed.path().join("manifest.json"))["config"]["reference_source"], "enumeration");
}

#[test]
fn mismatched_plan_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("bad.json");
    fs::write(&plan, r#"{"investment_cost": 0.0, "built": [999], "not_built": []}"#).unwrap();
    let case = case_arg();
    let plan = plan.display().to_string();
    let out = rtnep(
        &["assess", "--case", &case, "--gamma-d", "1", "--gamma-g", "1", "--plan", &plan, "--samples", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("assess.csv").exists());
}

#[test]
fn oracles_at_zero_budgets_report_nominal() {
    let case = case_arg();
    let dir = tempfile::tempdir().unwrap();
    let out = rtnep(&["oracle", "worst-case", "--case", &case, "--gamma-d", "0", "--gamma-g", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let w = json(&dir.path().join("worst.json"));
    assert!((w["operating_cost"].as_f64().unwrap() - nominal_cost()).abs() <= 1e-9 * nominal_cost());

    let dir = tempfile::tempdir().unwrap();
    let out = rtnep(&["oracle", "robust-plan", "--case", &case, "--gamma-d", "0", "--gamma-g", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let w = json(&dir.path().join("worst.json"));
    for u in w["realization"]["generators"].as_array().unwrap() {
        assert_eq!(u["deviated"], false);
    }
    assert!(dir.path().join("plan.json").is_file());
}

#[test]
fn enumeration_cap_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let out = rtnep(
        &["oracle", "worst-case", "--case", &case, "--gamma-d", "5", "--gamma-g", "3", "--cap", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("256"));
}

#[test]
fn iteration_limit_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let out = rtnep(
        &["solve", "--case", &case, "--gamma-d", "2", "--gamma-g", "1", "--max-outer", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("manifest.json"))["termination"], "iteration-limit");
    assert!(dir.path().join("plan.json").is_file());
}

#[test]
fn timings_are_opt_in() {
    let case = case_arg();
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rtnep(&["solve", "--case", &case, "--gamma-d", "1", "--gamma-g", "0"], dir.path()).status.code(), Some(0));
    let m = json(&dir.path().join("manifest.json"));
    assert!(m.get("started_unix").is_none());
    let dir = tempfile::tempdir().unwrap();
    let out = rtnep(&["solve", "--case", &case, "--gamma-d", "1", "--gamma-g", "0", "--timings"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&dir.path().join("manifest.json"))["finished_unix"].as_f64().unwrap() > 0.0);
}

#[test]
fn budget_above_entity_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let out = rtnep(&["solve", "--case", &case, "--gamma-d", "9", "--gamma-g", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

/// Without random starts the local search returns a vertex the master
/// already holds while the gap is still open.
#[test]
fn stalled_search_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_arg();
    let out = rtnep(&["solve", "--case", &case, "--gamma-d", "1", "--gamma-g", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["termination"], "stalled");
    assert!(m["final_gap"].as_f64().unwrap() > 1e-6);
}
