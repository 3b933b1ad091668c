use std::path::Path;
use std::process::{Command, Output};

fn nats(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nats")).args(args).env("RUST_BACKTRACE", "0").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn fig2_csv_is_byte_identical_across_runs() {
    let a = nats(&["fig2", "--sizes", "6,8", "--seed", "3", "--prep", "soft_measurement"]);
    let b = nats(&["fig2", "--sizes", "6,8", "--seed", "3", "--prep", "soft_measurement"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "Nn,R,beta,mu_x,mu_y,mu_z,D_nats,D_can,D_gc,smallparam_max,t,engine");
    assert_eq!(lines.count(), 2);
}

#[test]
fn output_file_feeds_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig2.csv");
    let run = nats(&["fig2", "--sizes", "6,8,10", "--output", csv.to_str().unwrap()]);
    assert!(run.status.success());
    assert!(run.stdout.is_empty());
    let fit = nats(&["fit", csv.to_str().unwrap()]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let text = stdout(&fit);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "D_nats");
    assert!(row[2].parse::<f64>().unwrap() < -1.5);
    let missing = nats(&["fit", csv.to_str().unwrap(), "--y", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn toml_and_json_configs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("c.toml");
    let json = dir.path().join("c.json");
    std::fs::write(&toml, "sizes = [6]\nseed = 4\n[chain]\nboundary = \"closed\"\n").unwrap();
    std::fs::write(&json, r#"{"sizes": [6], "seed": 4, "chain": {"boundary": "closed"}}"#).unwrap();
    let a = nats(&["fig2", "--config", toml.to_str().unwrap()]);
    let b = nats(&["fig2", "--config", json.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn shipped_configs_parse() {
    let out = nats(&["fig2", "--config", configs().join("fig2.toml").to_str().unwrap(), "--sizes", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = nats(&["robustness", "--config", configs().join("robustness.toml").to_str().unwrap(), "--sizes", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = nats(&[
        "stddev",
        "--config",
        configs().join("stddev.json").to_str().unwrap(),
        "--sizes",
        "4,5,6",
        "--trials",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(nats(&["fig2", "--sizes", "6", "--beta-formula", "closed"]).status.code(), Some(2));
    assert_eq!(nats(&["fig2", "--sizes", "7"]).status.code(), Some(2));
    assert_eq!(nats(&["fig2", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(nats(&["fig2", "--time-mode", "quadratic"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sizez = [6]\n").unwrap();
    assert_eq!(nats(&["fig2", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn size_guard_exits_3() {
    assert_eq!(nats(&["fig2", "--sizes", "14"]).status.code(), Some(3));
    assert_eq!(nats(&["robustness", "--sizes", "14", "--long-run"]).status.code(), Some(3));
}

#[test]
fn robustness_json() {
    let out = nats(&["robustness", "--sizes", "6", "--out", "json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &rows[0];
    assert_eq!(row["Nn"], 6);
    assert_eq!(row["echo_steps"], 193);
    assert!(row["D_nats"].as_f64().unwrap() < row["D_can"].as_f64().unwrap());
}

#[test]
fn exact_tomography() {
    let out = nats(&["tomo", "--sizes", "6", "--out", "json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["trace_distance"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn stddev_reports_fits() {
    let out = nats(&["stddev", "--sizes", "4,6,8", "--trials", "4", "--out", "json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["fits"].as_array().unwrap().len(), 3);
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
}
