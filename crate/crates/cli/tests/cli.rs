use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tightframe"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const B2: &str =
    r#"{"dim":1,"terms":[{"exp":[0],"re":0.25,"im":0},{"exp":[1],"re":0.5,"im":0},{"exp":[2],"re":0.25,"im":0}]}"#;
const B111: &str = r#"{"dim":2,"terms":[
  {"exp":[0,0],"re":0.125,"im":0},{"exp":[1,0],"re":0.125,"im":0},{"exp":[0,1],"re":0.125,"im":0},
  {"exp":[1,1],"re":0.25,"im":0},{"exp":[2,1],"re":0.125,"im":0},{"exp":[1,2],"re":0.125,"im":0},
  {"exp":[2,2],"re":0.125,"im":0}]}"#;

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn b111_example_with_framelets() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["example", "b111", "--framelets"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["N"], 5);
    assert_eq!(v["result"]["defectRank"], 5);
    assert_eq!(v["pass"], true);
    assert!(v.get("timingMs").is_none());
}

#[test]
fn drury_example_reports_rejection() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["example", "drury"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v["result"]["rejection"].as_str().unwrap().contains("non-negative"));
    assert!(v["result"]["defectGridMin"].as_f64().unwrap() >= -1e-9);
    assert!((v["result"]["qAtOnes"]["re"].as_f64().unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "one.json", r#"{"dim":2,"terms":[{"exp":[0,0],"re":1,"im":0}]}"#);
    write(d, "b2.json", B2);
    write(d, "broken.json", "{ not json");
    write(d, "quincunx.json", "[[1,1],[1,-1]]");
    let cases: &[(&[&str], i32)] = &[
        (&["analyze", "--mask", "one.json"], 1),
        (&["certify", "--mask", "one.json"], 1),
        (&["analyze", "--mask", "b2.json"], 0),
        (&["certify", "--mask", "b2.json"], 0),
        (&["realize", "--mask", "b2.json"], 0),
        (&["framelets", "--mask", "b2.json"], 0),
        (&["univariate", "--mask", "b2.json", "--m", "2"], 0),
        (&["univariate", "--mask", "b2.json", "--m", "1"], 2),
        (&["analyze", "--mask", "missing.json"], 2),
        (&["analyze", "--mask", "broken.json"], 2),
        (&["analyze", "--mask", "b2.json", "--dilation", "2I:2"], 2),
        (&["analyze", "--mask", "one.json", "--dilation", "quincunx.json"], 1),
        (&["boxspline", "--directions", "1,1;3,3"], 1),
        (&["boxspline", "--directions", "1,0;0,1;1,1", "--mult", "1,x,1"], 2),
        (&["boxspline", "--directions", "1,0;0,1;1,1;1,-1"], 0),
        (&["example", "haar"], 0),
        (&["frobnicate"], 2),
        (&["analyze"], 2),
    ];
    for (args, expected) in cases {
        let out = run(d, args);
        assert_eq!(
            code(&out),
            *expected,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b111.json", B111);
    let args = ["framelets", "--mask", "b111.json", "--dilation", "2I:2"];
    let a = run(dir.path(), &args);
    let b = run(dir.path(), &args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b111.json", B111);
    let out = run(dir.path(), &["certify", "--mask", "b111.json", "--out", "report.json"]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["result"]["certificate"]["length"], 3);
}

#[test]
fn verify_accepts_constructed_framelets_and_rejects_perturbed_ones() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "b111.json", B111);
    let out = run(d, &["framelets", "--mask", "b111.json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let masks = v["result"]["framelets"]["masks"].clone();
    write(d, "good.json", &masks.to_string());
    assert_eq!(
        code(&run(d, &["verify", "--mask", "b111.json", "--framelets", "good.json"])),
        0
    );

    let mut bad = masks;
    bad[0]["terms"][0]["re"] = Value::from(bad[0]["terms"][0]["re"].as_f64().unwrap() + 1e-3);
    write(d, "bad.json", &serde_json::json!({ "masks": bad }).to_string());
    let out = run(d, &["verify", "--mask", "b111.json", "--framelets", "bad.json"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn dilation_file_forms() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "b111.json", B111);
    write(d, "setup.json", r#"{"M": [[2,0],[0,2]]}"#);
    write(
        d,
        "wrong.json",
        r#"{"M": [[2,0],[0,2]], "cosets": [[0,0],[1,1],[0,1],[1,0]]}"#,
    );
    assert_eq!(
        code(&run(d, &["analyze", "--mask", "b111.json", "--dilation", "setup.json"])),
        0
    );
    assert_eq!(
        code(&run(d, &["analyze", "--mask", "b111.json", "--dilation", "wrong.json"])),
        2
    );
}

#[test]
fn custom_q0_flag() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // Haar has zero defect, so a zero q0 column is admissible
    write(
        d,
        "haar.json",
        r#"{"dim":1,"terms":[{"exp":[0],"re":0.5,"im":0},{"exp":[1],"re":0.5,"im":0}]}"#,
    );
    write(
        d,
        "zero.json",
        r#"{"rows":1,"cols":1,"dim":1,"entries":[[{"dim":1,"terms":[]}]]}"#,
    );
    let out = run(d, &["framelets", "--mask", "haar.json", "--q0", "zero.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["result"]["N"], 1);
}

#[test]
fn timing_is_opt_in() {
    let dir = TempDir::new().unwrap();
    let v = json(&run(dir.path(), &["example", "haar", "--timing"]));
    assert!(v["timingMs"].as_f64().is_some());
}
