use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/meeting_scheduler.cgm")
}

fn cgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn optimize_fixture_prints_weight() {
    let o = cgm(&["optimize", fixture().to_str().unwrap(), "--lex", "Weight"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective Weight = -65/1"), "{}", stdout(&o));
}

#[test]
fn lexicographic_json() {
    let o = cgm(&["optimize", fixture().to_str().unwrap(), "--lex", "Weight,workTime,cost", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "realizable");
    assert_eq!(v["realization"]["objectiveValues"], serde_json::json!(["-65/1", "2/1", "0/1"]));
}

#[test]
fn max_overrides_direction() {
    let o = cgm(&["optimize", fixture().to_str().unwrap(), "--max", "Weight"]);
    assert!(stdout(&o).contains("objective Weight = 150/1"), "{}", stdout(&o));
}

#[test]
fn empty_model_is_realizable() {
    let d = TempDir::new().unwrap();
    let p = write(&d, "empty.cgm", "");
    let o = cgm(&["check", &p]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "realizable");
}

#[test]
fn contradiction_core_lists_both_assertions() {
    let d = TempDir::new().unwrap();
    let p = write(&d, "contradiction.cgm", "goal G; assert G true; assert G false;");
    let o = cgm(&["core", &p]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("assert G true") && out.contains("assert G false"), "{out}");

    let o = cgm(&["core", &p, "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);
    assert_eq!(cgm(&["check", &p]).status.code(), Some(1));
}

#[test]
fn parse_errors_go_to_stderr_with_code_two() {
    let d = TempDir::new().unwrap();
    let p = write(&d, "bad.cgm", "goal ;\nrefine X <- ;");
    let o = cgm(&["check", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains(":1:6:") && err.contains(":2:"), "{err}");
    assert_eq!(cgm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cgm(&["check", "/definitely/missing.cgm"]).status.code(), Some(2));
    assert_eq!(cgm(&["optimize", fixture().to_str().unwrap(), "--lex", "nope"]).status.code(), Some(2));
}

#[test]
fn tight_budget_exits_three() {
    let o = cgm(&["optimize", fixture().to_str().unwrap(), "--lex", "Weight", "--timeout", "0.000001"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("budget"));
}

#[test]
fn enumerate_respects_limit() {
    let o = cgm(&["enumerate", fixture().to_str().unwrap(), "--limit", "5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["realizations"].as_array().unwrap().len(), 5);
    assert_eq!(v["exhausted"], false);

    let d = TempDir::new().unwrap();
    let p = write(&d, "m.cgm", "goal g; goal a; goal b; refine g <- a; refine g <- b;");
    let o = cgm(&["enumerate", &p]);
    assert!(stdout(&o).contains("4 realization(s)\n"), "{}", stdout(&o));
}

#[test]
fn entail_reports_forced_elements() {
    let o = cgm(&["entail", fixture().to_str().unwrap(), "LowCost"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("LowCost -> !UseHotelsAndConventionCenters"), "{}", stdout(&o));
    assert_eq!(cgm(&["entail", fixture().to_str().unwrap(), "Nope"]).status.code(), Some(2));
}

#[test]
fn evolve_from_previous_solution() {
    let d = TempDir::new().unwrap();
    let o = cgm(&["solve", fixture().to_str().unwrap(), "--json"]);
    let prev = write(&d, "prev.json", &stdout(&o));
    let new = fs::read_to_string(fixture()).unwrap() + "\ngoal Extra;\n";
    let new = write(&d, "new.cgm", &new);
    let o = cgm(&["evolve", fixture().to_str().unwrap(), &new, "--from", &prev, "--mode", "both"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective evoBoth = 0/1"), "{}", stdout(&o));
}

#[test]
fn json_models_are_accepted() {
    let d = TempDir::new().unwrap();
    let json = cgm_json(&d);
    let o = cgm(&["optimize", &json, "--lex", "Weight"]);
    assert!(stdout(&o).contains("-65/1"), "{}", stdout(&o));
}

fn cgm_json(d: &TempDir) -> String {
    let m = cgm_core::fixture::meeting_scheduler();
    write(d, "fixture.json", &cgm_core::json::model_to_json(&m))
}

#[test]
fn export_strict_atom_and_scaffolding() {
    let d = TempDir::new().unwrap();
    let p = write(&d, "s.cgm", "attr cost; goal A prereq+ (cost < 100); set A.cost sat 3;");
    let o = cgm(&["export", &p, "--lex", "cost"]);
    let out = stdout(&o);
    assert!(out.contains("(< cost 100)"), "{out}");
    assert!(out.ends_with("(minimize cost :id cost)\n(check-sat)\n(get-objectives)\n"), "{out}");
    let e = write(&d, "e.cgm", "");
    assert_eq!(stdout(&cgm(&["export", &e])), "(set-logic QF_LRA)\n(check-sat)\n");
}

#[test]
fn bench_writes_instances_and_csv() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("run");
    let o = cgm(&[
        "bench", "--n", "2,3", "--k", "2", "--p", "1", "--variant", "reduced", "--instances", "2", "--mode", "check",
        "--mode", "cost", "--jobs", "2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = stdout(&o);
    assert!(summary.starts_with("config_id,mode,instances,solved,median_ms,pct_unrealizable,pct_budget\n"));
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), summary);
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 9);
    assert!(out.join("instances/reduced-n3-k2-p1-s0/reduced-n3-k2-p1-s0-001.cgm").exists());
    assert_eq!(cgm(&["bench", "--variant", "tiny"]).status.code(), Some(2));
}
