use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tensor-mp"))
        .args(args)
        .output()
        .expect("spawn tensor-mp")
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn bad_dimensions_exit_2() {
    let o = run(&["mp-esd", "--n", "3", "--d", "4", "--N", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());

    let o = run(&["mp-esd", "--n", "10", "--d", "0", "--N", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resource_cap_exits_3() {
    let o = run(&["mp-esd", "--n", "40", "--d", "3", "--N", "100", "--max-p", "4096"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn envelope_and_version() {
    let v = json(&run(&["gamma", "--n-max", "4", "--d-max", "2", "--seed", "11"]));
    assert_eq!(v["tool"], "tensor-mp");
    assert_eq!(v["subcommand"], "gamma");
    assert_eq!(v["seed"], 11);
    assert_eq!(v["schema_version"], 1);
    let version = v["version"].as_str().unwrap();
    assert!(version.starts_with(concat!(env!("CARGO_PKG_VERSION"), "+")), "{version}");
    assert!(v.get("wall_time_seconds").is_none());
    assert!(v["config"].get("out").is_none());
    assert!(v["config"].get("threads").is_none());
}

#[test]
fn record_time_adds_wall_time() {
    let v = json(&run(&["gamma", "--n-max", "4", "--d-max", "2", "--record-time"]));
    assert!(v["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn small_p_warns() {
    let v = json(&run(&["mp-esd", "--n", "5", "--d", "1", "--N", "10"]));
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn csv_has_header_and_rows() {
    let o = run(&["gamma", "--n-max", "5", "--d-max", "2", "--format", "csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains(','));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    let cols = header.split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == cols));
}

#[test]
fn out_file_matches_stdout() {
    let args = ["esp-lln", "--n-grid", "50", "--reps", "3", "--seed", "9"];
    let stdout = run(&args).stdout;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = run(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn unwritable_out_exits_1() {
    let o = run(&["gamma", "--n-max", "3", "--d-max", "1", "--out", "/nonexistent-dir/x/report.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_distribution_is_rejected() {
    let o = run(&["mp-esd", "--n", "10", "--d", "2", "--N", "10", "--dist", "cauchy"]);
    assert!(!o.status.success());
}
