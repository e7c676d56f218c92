use std::fs;
use std::process::Command;

use lotgen::io::read_instance;
use lottype_core::controller::{verify_certificate, Conclusion, SolveReport};

fn lotgen(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lotgen")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn cost_line(stdout: &str) -> String {
    stdout.lines().find(|l| l.starts_with("cost")).unwrap_or_default().split_whitespace().nth(1).unwrap_or_default().to_string()
}

#[test]
fn generate_solve_and_oracle_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i1.json");
    let report = dir.path().join("report.json");
    let inst_s = inst.to_str().unwrap();

    let (code, _) = lotgen(&["generate", "--preset", "t1-i1", "--seed", "3", "-o", inst_s]);
    assert_eq!(code, 0);
    assert_eq!(lotgen(&["validate", inst_s]).0, 0);

    let (code, out) = lotgen(&["solve", inst_s, "--threads", "1", "--report", report.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("proven optimal"));
    let (code, oracle) = lotgen(&["oracle", inst_s]);
    assert_eq!(code, 0);
    assert_eq!(cost_line(&out), cost_line(&oracle));

    let parsed: SolveReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.certificate.conclusion, Conclusion::ProvenOptimal);
    let instance = read_instance(&inst).unwrap();
    assert!(verify_certificate(&instance, &parsed).passed());
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sizes": ["S"], "branches": []}"#).unwrap();
    assert_eq!(lotgen(&["validate", bad.to_str().unwrap()]).0, 1);
    assert_eq!(lotgen(&["solve", bad.to_str().unwrap()]).0, 1);
    assert_eq!(lotgen(&["solve", dir.path().join("missing.json").to_str().unwrap()]).0, 1);
}

#[test]
fn zero_time_limit_stops_after_the_heuristic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i2.json");
    let inst_s = inst.to_str().unwrap();
    assert_eq!(lotgen(&["generate", "--preset", "t1-i2", "--seed", "1", "-o", inst_s]).0, 0);
    let report = dir.path().join("r.json");
    let (code, out) = lotgen(&["solve", inst_s, "--time-limit", "0", "--report", report.to_str().unwrap()]);
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("limit reached"));
}
