use std::fs;
use std::process::{Command, Output};

fn maxent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxent")).args(args).output().expect("binary runs")
}

fn emit(name: &str, dir: &std::path::Path) -> std::path::PathBuf {
    let out = maxent(&["builtin", name, "--emit"]);
    assert!(out.status.success());
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn emitted_builtin_runs_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(emit("bloch", dir.path())).unwrap()).unwrap();
    doc["probes"] = serde_json::json!([doc["probes"][0].clone()]);
    let file = dir.path().join("small.json");
    fs::write(&file, serde_json::to_string(&doc).unwrap()).unwrap();
    let report = dir.path().join("report.json");
    let csv = dir.path().join("csv");
    let out = maxent(&["run", file.to_str().unwrap(), "--out", report.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["outcomes"][0]["agreement"][0], "agree");
    let tables: Vec<_> = fs::read_dir(&csv).unwrap().collect();
    assert_eq!(tables.len(), 2);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(emit("bloch", dir.path())).unwrap()).unwrap();
    doc["probes"] = serde_json::json!([]);
    let file = dir.path().join("empty.json");
    fs::write(&file, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = maxent(&["run", file.to_str().unwrap(), "--seed", "42"]);
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["scenario"]["seed"], 42);
}

#[test]
fn infer_prints_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit("bloch", dir.path());
    let out = maxent(&["infer", file.to_str().unwrap(), "--mean", "-0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["support_rank"], 2);
    assert_eq!(row["solver"], "dual");
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit("cone", dir.path());
    let out = maxent(&["infer", file.to_str().unwrap(), "--mean", "10,10"]);
    assert_eq!(out.status.code(), Some(2));

    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(&file).unwrap()).unwrap();
    doc["unexpected"] = serde_json::json!(true);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = maxent(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unexpected"));
}

#[test]
fn missing_file_is_an_infrastructure_error() {
    let out = maxent(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_builtin_is_rejected() {
    let out = maxent(&["builtin", "torus", "--emit"]);
    assert!(!out.status.success());
}
