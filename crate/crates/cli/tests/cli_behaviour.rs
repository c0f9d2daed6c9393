//! End-to-end behaviour of the `contact-verify` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contact-verify"));
    c.env_remove("CONTACT_THREADS");
    c
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn run_json(name: &str) -> (i32, Value) {
    let o = bin().arg("run").arg(spec(name)).output().unwrap();
    (code(&o), serde_json::from_slice(&o.stdout).expect("report on stdout"))
}

fn check<'a>(r: &'a Value, id: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["id"] == id).unwrap_or_else(|| panic!("no check {id}"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn kink_grid_members_exactly_on_unit_interval() {
    let (c, r) = run_json("kink_grid.json");
    assert_eq!(c, 0);
    let members: Vec<f64> = check(&r, "t-grid")["details"]["first_order_members"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let expected: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    assert_eq!(members, expected);
    assert_eq!(check(&r, "t-grid-strata")["verdict"], "passed");
}

#[test]
fn holder_approximation_and_resonant_line_pass() {
    let (c, r) = run_json("holder_approximation.json");
    assert_eq!(c, 0);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["verdict"] == "passed"));
    let (c, _) = run_json("oscillating_line.json");
    assert_eq!(c, 0);
}

#[test]
fn mutant_is_violated_and_replays() {
    let (c, r) = run_json("laplacian_solution.json");
    assert_eq!(c, 1);
    assert_eq!(check(&r, "consistent")["verdict"], "passed");
    let mutant = check(&r, "mutant");
    assert_eq!(mutant["verdict"], "violated");
    assert!(mutant["margin"].as_f64().unwrap() <= -0.9);
    assert_eq!(check(&r, "laplacian")["verdict"], "passed");

    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(spec("laplacian_solution.json")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 1);
    let report = dir.path().join("report.json");
    for id in ["mutant", "consistent", "laplacian"] {
        let o = bin().arg("replay").arg(&report).args(["--check", id]).output().unwrap();
        assert_eq!(code(&o), 0, "replay {id}: {}", String::from_utf8_lossy(&o.stdout));
        let out: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(out["reproduced"], true);
    }
    let o = bin().arg("replay").arg(&report).args(["--check", "mutant"]).output().unwrap();
    let out: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(out["witness_confirmed"], true);
}

#[test]
fn tampered_witness_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(spec("laplacian_solution.json")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 1);
    let report = dir.path().join("report.json");
    let mut r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let checks = r["checks"].as_array_mut().unwrap();
    let m = checks.iter_mut().find(|c| c["id"] == "mutant").unwrap();
    let v = m["witness"]["violation"]["value"].as_f64().unwrap();
    m["witness"]["violation"]["value"] = Value::from(v * 0.5);
    std::fs::write(&report, serde_json::to_string(&r).unwrap()).unwrap();
    let o = bin().arg("replay").arg(&report).args(["--check", "mutant"]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn outputs_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(spec("kink_grid.json")).arg("--out").arg(dir.path()).arg("--plots").output().unwrap();
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check_id,radius,max_ratio"));
    assert!(lines.next().is_some_and(|l| l.starts_with("t-grid/")));
    let svgs: Vec<_> = std::fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "svg")).collect();
    assert!(!svgs.is_empty());
    assert!(std::fs::read_to_string(svgs[0].path()).unwrap().starts_with("<svg"));
}

#[test]
fn runs_are_deterministic_and_seeded() {
    let a = bin().arg("run").arg(spec("laplacian_solution.json")).output().unwrap();
    let b = bin().arg("run").arg(spec("laplacian_solution.json")).env("CONTACT_THREADS", "1").output().unwrap();
    let strip = |o: &Output| {
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v.as_object_mut().unwrap().remove("wall_times");
        v
    };
    assert_eq!(strip(&a), strip(&b));
    let c = bin().arg("run").arg(spec("laplacian_solution.json")).args(["--seed", "99"]).output().unwrap();
    assert_eq!(strip(&c)["seed"], 99);
}

#[test]
fn empty_check_list_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "empty.json",
        r#"{"schema":1,"seed":1,"dims":{"N":2,"n":1},"map":{"builtin":"example19","params":{"a":[1,0],"b":[0,1],"c":[0,0]}},"points":[[0.0]],"checks":[]}"#,
    );
    let o = bin().arg("run").arg(&p).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn input_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\n  \"schema\": 1,\n  \"seed\": oops\n}");
    let o = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"schema":1,"seed":1,"dims":{"N":2,"n":1},"map":{"builtin":"no_such_map"},"points":[[0.0]],"checks":[]}"#,
    );
    assert_eq!(code(&bin().arg("run").arg(&unknown).output().unwrap()), 3);
    assert_eq!(code(&bin().arg("run").arg(dir.path().join("missing.json")).output().unwrap()), 3);
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 3);
    assert_eq!(code(&bin().arg("run").arg(spec("kink_grid.json")).args(["--tol", "-1"]).output().unwrap()), 3);
    assert_eq!(code(&bin().arg("run").arg(spec("kink_grid.json")).env("CONTACT_THREADS", "zero").output().unwrap()), 3);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}

#[test]
fn suite_catches_injected_fault_and_replays_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["paper-suite", "--fault", "lambda-minus-sign", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let violated: Vec<&str> = r["checks"].as_array().unwrap().iter().filter(|c| c["verdict"] == "violated").map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(violated, ["vee-spectra"]);
    assert!(dir.path().join("summary.txt").exists());
    let o = bin().arg("replay").arg(dir.path().join("report.json")).args(["--check", "vee-spectra"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn tight_decay_tolerance_is_inconclusive_not_violated() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["paper-suite", "--decay-tol", "1e-12", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(check(&r, "kink-jet-oracle")["verdict"], "inconclusive");
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["verdict"] != "violated"));
}
