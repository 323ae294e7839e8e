use std::path::Path;
use std::process::{Command, Output};

fn cdfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdfi"))
        .args(args)
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn models_list_names_presets() {
    let out = cdfi(&["models", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["mackey-glass", "suarez-schopf", "toy", "custom"] {
        assert!(text.contains(name));
    }
    let out = cdfi(&["models", "list", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 4);
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "bad.json",
        "{\"model\":\n  {\"preset\": \"toy\",}}",
    );
    let out = cdfi(&["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
    let cfg = config(
        dir.path(),
        "neg.json",
        r#"{"model": {"preset": "toy"}, "sweep": {"d_omega": -1}}"#,
    );
    assert_eq!(cdfi(&["verify", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(
        cdfi(&["verify", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_is_deterministic_and_maps_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "mg.json",
        r#"{"model": {"preset": "mackey-glass", "tau": 1.0}}"#,
    );
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = cdfi(&[
            "verify",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--jobs",
            "1",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8(out.stdout)
            .unwrap()
            .contains("closed invariant contours"));
        csvs.push(std::fs::read(out_dir.join("verify.csv")).unwrap());
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out_dir.join("verify.json")).unwrap()).unwrap();
        assert_eq!(report["resolved"]["nu0"], 0.05);
    }
    assert_eq!(csvs[0], csvs[1]);
    assert!(String::from_utf8_lossy(&csvs[0]).starts_with("omega,alpha,margin\n"));

    let cfg = config(
        dir.path(),
        "mg6.json",
        r#"{"model": {"preset": "mackey-glass", "tau": 6.0}}"#,
    );
    assert_eq!(cdfi(&["verify", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn oracle_battery_and_forced_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "toy.json", r#"{"model": {"preset": "toy"}}"#);
    let out = cdfi(&["oracle", "--config", &cfg, "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["all_pass"], true);

    let cfg = config(
        dir.path(),
        "broken.json",
        r#"{"model": {"preset": "toy"}, "oracle": {"break_trace_coupling": true}}"#,
    );
    let out = cdfi(&["oracle", "--config", &cfg, "--csv"]);
    assert_eq!(out.status.code(), Some(1));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.starts_with("generator-difference-quotient") && l.ends_with("false")));
}

#[test]
fn spectrum_simulate_and_structural_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "mg.json",
        r#"{"model": {"preset": "mackey-glass"}, "sweep": {"nu0": "auto"}, "structural": {"grids": [20, 40]}, "simulate": {"t_end": 2.0}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = cdfi(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("spectrum.json")).unwrap()).unwrap();
    assert!((rep["resolved"]["spectral_bound"].as_f64().unwrap() + 0.2).abs() < 1e-8);
    assert!((rep["resolved"]["nu0"].as_f64().unwrap() - 0.1).abs() < 1e-8);
    assert_eq!(rep["resolved"]["nu0_source"], "auto");
    assert!(std::fs::read_to_string(out_dir.join("spectrum.csv"))
        .unwrap()
        .starts_with("re,im,"));

    let out = cdfi(&["simulate", "--config", &cfg, "--csv"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("t,x1\n"));
    assert_eq!(csv.lines().count(), 2 + 200);

    let out = cdfi(&["structural-check", "--config", &cfg, "--csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}
