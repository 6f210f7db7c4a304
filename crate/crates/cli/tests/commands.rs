use std::path::Path;
use std::process::{Command, Output};

fn gb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gb")).current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gb(dir.path(), &["build", "--config", "absent.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_parameters_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "steep.json", r#"{"sin_theta": 0.5}"#);
    write(dir.path(), "unknown.json", r#"{"epsilom": 0.001}"#);
    write(dir.path(), "empty.json", r#"{"sweep": {"sin_theta": []}}"#);
    for (cmd, cfg) in [("build", "steep.json"), ("build", "unknown.json"), ("sweep", "empty.json"), ("sweep", "steep.json")] {
        let out = gb(dir.path(), &[cmd, "--config", cfg]);
        assert_eq!(out.status.code(), Some(1), "{cmd} {cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn tampered_field_is_inadmissible() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gb(dir.path(), &["build", "--out", "field.json"]).status.success());
    assert!(gb(dir.path(), &["check", "--field", "field.json"]).status.success());

    let text = std::fs::read_to_string(dir.path().join("field.json")).unwrap();
    let mut field: serde_json::Value = serde_json::from_str(&text).unwrap();
    let cell = field["cells"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|c| c["region"]["kind"] == "DeltaA")
        .unwrap();
    cell["strain"][1] = serde_json::json!(cell["strain"][1].as_f64().unwrap() + 0.01);
    write(dir.path(), "tampered.json", &field.to_string());

    let out = gb(dir.path(), &["check", "--field", "tampered.json", "--out", "report.json"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["h1_ok"], false);
}

#[test]
fn degenerate_lattice_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", r#"{"phi": 0.0, "eta": 1.5707963267948966, "lambda": 2.0, "mc_samples": 2000}"#);
    let check = gb(dir.path(), &["check", "--config", "cfg.json", "--out", "report.json"]);
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
    let energy = gb(dir.path(), &["energy", "--config", "cfg.json"]);
    assert!(energy.status.success());
    let report: serde_json::Value = serde_json::from_slice(&energy.stdout).unwrap();
    assert!(report["total"].as_f64().unwrap() > 0.0);
    assert_eq!(report["E0"].as_f64().unwrap(), 1.0);
}

#[test]
fn sweep_writes_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", r#"{"mc_samples": 2000, "sweep": {"sin_theta": [0.03125, 0.015625, 0.0078125]}}"#);
    let out = gb(dir.path(), &["sweep", "--config", "cfg.json", "--csv", "rows.csv"]);
    assert!(out.status.success());
    let mut rows = csv::Reader::from_path(dir.path().join("rows.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(&headers[0], "theta");
    assert_eq!(rows.records().count(), 3);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["fit"]["r_squared"].as_f64().unwrap() > 0.0);
}
