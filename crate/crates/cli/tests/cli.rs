use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FINSLER_LAB_OUT")
        .output()
        .expect("spawn finsler-lab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a finsler-lab CSV as header-keyed maps.
fn csv_rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn rows_by_id(report: &Value) -> Vec<(String, String)> {
    report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["id"].as_str().unwrap().to_string(), r["status"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn verify_funk_plane() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "funk", "--dim", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["failed"], 0);
    for (id, status) in rows_by_id(&report) {
        assert_ne!(status, "fail", "{id}");
    }
    let kappa = report["rows"].as_array().unwrap().iter().find(|r| r["id"] == "funk-constant-curvature").unwrap();
    assert_eq!(kappa["expected"].as_f64(), Some(-0.25));
    assert_eq!(kappa["status"], "pass");
    for id in ["okada", "funk-s-curvature", "funk-ball-volume", "funk-model-equality"] {
        assert!(rows_by_id(&report).iter().any(|(r, s)| r == id && s == "pass"), "{id}");
    }
}

#[test]
fn verify_euclidean_three() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "euclidean", "--dim", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["failed"], 0);
    let ids: Vec<String> = rows_by_id(&report).into_iter().map(|(id, _)| id).collect();
    for id in ["flat-curvature", "flat-berwald", "flat-s-curvature"] {
        assert!(ids.iter().any(|i| i == id), "{id}");
    }
}

#[test]
fn verify_hilbert_quartic_domain() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "hilbert", "--domain", "quartic:0.1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("verify.json"));
    let rows = report["rows"].as_array().unwrap();
    let kappa = rows.iter().find(|r| r["id"] == "hilbert-constant-curvature").unwrap();
    assert_eq!(kappa["expected"].as_f64(), Some(-1.0));
    assert_eq!(kappa["status"], "pass");
    let kk = rows.iter().find(|r| r["id"] == "hilbert-dot-landsberg").unwrap();
    assert_eq!(kk["status"], "pass");
}

#[test]
fn volume_funk_radii() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["volume", "--metric", "funk", "--radii", "0.5,1,2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("volume.csv"));
    assert_eq!(rows.len(), 3);
    let r1 = rows.iter().find(|r| r["r"] == "1").unwrap();
    let v: f64 = r1["volume"].parse().unwrap();
    assert!((v - 1.2554).abs() <= 0.01 * 1.2554, "{v}");
}

#[test]
fn geodesic_hilbert_constant_speed() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["geodesic", "--metric", "hilbert", "--from", "0.1,-0.2", "--dir", "1,0.5", "--t", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("geodesic.csv"));
    assert!(rows.len() > 10);
    let f: Vec<f64> = rows.iter().filter(|r| r["status"] == "ok").map(|r| r["F"].parse().unwrap()).collect();
    for v in &f {
        assert!((v - f[0]).abs() < 1e-8 * f[0], "{v} vs {}", f[0]);
    }
}

#[test]
fn compare_funk_model_ratio() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["compare", "--metric", "funk", "--lambda", "-0.25", "--delta", "1.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("compare.csv"));
    assert!(!rows.is_empty());
    for r in &rows {
        let ratio: f64 = r["ratio"].parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-3, "r = {}: {ratio}", r["r"]);
    }
    let summary = json(&dir.path().join("compare.json"));
    assert!(summary["conjugate"].is_null());
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["verify", "--metric", "randers", "--seed", "7", "--samples", "6"];
    assert_eq!(code(&lab(a.path(), &args)), 0);
    assert_eq!(code(&lab(b.path(), &args)), 0);
    let args = ["volume", "--metric", "hilbert", "--radii", "0.25,0.75", "--mc-samples", "20000"];
    assert_eq!(code(&lab(a.path(), &args)), 0);
    assert_eq!(code(&lab(b.path(), &args)), 0);
    for name in ["verify.json", "verify.csv", "volume.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn csv_header_is_versioned_and_embeds_config() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["curvature", "--metric", "sphere", "--samples", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("curvature.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# finsler-lab curvature csv v1"));
    let cfg: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg["metric"], "sphere");
    assert_eq!(cfg["samples"], 4);
    assert_eq!(cfg["seed"], 1);
    assert_eq!(cfg["params"]["dim"], 2);
    assert!(cfg.get("out_dir").is_none());
}

#[test]
fn unknown_metric_lists_catalog() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "kropina"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for id in ["euclidean", "sphere", "randers", "funk", "hilbert"] {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"metric": "funk", "radius": 2}"#).unwrap();
    let o = lab(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("radius"), "{}", stderr(&o));
}

#[test]
fn unknown_tolerance_id_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "euclidean", "--tol", "no-such-check=1e-3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no-such-check"));
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["verify", "--metric", "sphere", "--samples", "4", "--tol", "sphere-curvature=0"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let report = json(&dir.path().join("verify.json"));
    let row = report["rows"].as_array().unwrap().iter().find(|r| r["id"] == "sphere-curvature").unwrap();
    assert_eq!(row["status"], "fail");
    assert_eq!(row["tolerance"].as_f64(), Some(0.0));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"metric": "hyperbolic", "seed": 3, "samples": 5, "params": {"dim": 3}}"#).unwrap();
    let o = lab(dir.path(), &["--config", cfg.to_str().unwrap(), "curvature", "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("curvature.csv")).unwrap();
    let cfg: Value = serde_json::from_str(text.lines().nth(1).unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg["metric"], "hyperbolic");
    assert_eq!(cfg["seed"], 9);
    assert_eq!(cfg["samples"], 5);
    assert_eq!(csv_rows(&dir.path().join("curvature.csv")).len(), 5);
    assert!(text.contains("kappa2"));
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_finsler-lab"))
        .current_dir(dir.path())
        .args(["validate", "--metric", "quartic_norm"])
        .env("FINSLER_LAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&target.join("validate.json"));
    assert_eq!(v["valid"], true);
    assert!(!dir.path().join("finsler-lab-out").exists());
}

#[test]
fn invalid_metric_parameters_exit_one() {
    let dir = TempDir::new().unwrap();
    // |β| ≥ 1 breaks the Randers condition
    let o = lab(dir.path(), &["validate", "--metric", "randers", "--beta", "1.2,0"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v = json(&dir.path().join("validate.json"));
    assert_eq!(v["valid"], false);
}

#[test]
fn geodesic_needs_direction() {
    let dir = TempDir::new().unwrap();
    let o = lab(dir.path(), &["geodesic", "--metric", "euclidean"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--dir"));
}
