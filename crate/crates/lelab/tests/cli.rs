use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn lelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lelab")).args(args).output().expect("spawn lelab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_profile_run() {
    let dir = scratch("profile1d");
    let cfg = write_config(&dir, r#"{"pipeline": "profile1d", "q": 0.5, "w0p": 1.0, "T": 10}"#);
    let out = dir.join("out");
    let o = lelab(&["profile1d", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut rdr = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let h: Vec<f64> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert!(h.len() > 1000);
    let drift = h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max) / h[0].abs();
    assert!(drift <= 1e-6, "drift {drift:e}");
    assert!((h[0] - 0.5).abs() < 1e-15);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn out_of_range_q_is_a_config_error() {
    let dir = scratch("badq");
    let o = lelab(&["solve", "--q", "1.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0 < q < 1"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = scratch("badkey");
    let cfg = write_config(&dir, r#"{"qq": 0.5}"#);
    let o = lelab(&["solve", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_mismatch_is_a_config_error() {
    let dir = scratch("mismatch");
    let cfg = write_config(&dir, r#"{"pipeline": "angular"}"#);
    let o = lelab(&["profile1d", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_criteria_list_warns_and_succeeds() {
    let dir = scratch("nocriteria");
    let cfg = write_config(&dir, r#"{"criteria": []}"#);
    let o = lelab(&["verify-all", "--config", &cfg, "--out", dir.join("out").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

#[test]
fn selected_criteria_only() {
    let dir = scratch("ode_criteria");
    let cfg = write_config(&dir, r#"{"criteria": [2, 4]}"#);
    let out = dir.join("out");
    let o = lelab(&["verify-all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2, "{stdout}");
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn print_defaults_resolves_q_dependent_keys() {
    let o = lelab(&["scan", "--q", "0.4", "--print-defaults"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["t_list"], serde_json::json!([0.0, 0.4, 2.0]));
    assert_eq!(v["gt_pairs"][1][0].as_f64().unwrap(), 1.25);
}

fn small_solve(out: &Path) {
    let o = lelab(&["solve", "--n", "33", "--schedule-steps", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn solve_dumps_round_trip() {
    let dir = scratch("solve33");
    small_solve(&dir);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pipeline"], "solve");
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 9);
    for f in files {
        let bytes = fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len() as u64, f["bytes"].as_u64().unwrap());
        assert_eq!(crc32fast::hash(&bytes) as u64, f["crc32"].as_u64().unwrap());
    }
    let (u, side) = lelab::io::read_field(&dir.join("u_eps3.f64")).unwrap();
    assert_eq!(side.n, 33);
    assert_eq!(u.grid().n(), 33);
    let p = side.params.unwrap();
    assert!((p.epsilon - 0.0125).abs() < 1e-15);
    assert!(u.values().iter().all(|v| v.is_finite()));

    let mut rdr = csv::Reader::from_path(dir.join("sequence.csv")).unwrap();
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch("rerun_a"), scratch("rerun_b"));
    small_solve(&a);
    small_solve(&b);
    for name in ["sequence.csv", "u_eps0.f64", "u_eps3.f64", "u_eps3.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}
