//! Drives the `tevent` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tevent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tevent")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn lists_and_prints_presets() {
    let out = tevent(&["preset"]);
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    assert!(listing.lines().any(|l| l == "fig4"));

    let out = tevent(&["preset", "fig6"]);
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["scenario"], "image1");

    assert_eq!(tevent(&["preset", "nope"]).status.code(), Some(2));
}

#[test]
fn validate_reports_exit_codes() {
    assert!(tevent(&["validate", "--preset", "fig7-rc11"]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let incompatible = write_config(dir.path(), r#"{"scenario": "image1", "detectors": ["targeted-dlik"],
            "window": {"current": 1, "reference": 10, "tolerance": 1}}"#);
    let out = tevent(&["validate", "--config", &incompatible]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("targeted-dlik"));

    let invalid = write_config(dir.path(), r#"{"window": {"current": 0, "reference": 5, "tolerance": 1}}"#);
    assert_eq!(tevent(&["validate", "--config", &invalid]).status.code(), Some(2));

    let unknown_field = write_config(dir.path(), r#"{"windw": {}}"#);
    assert_eq!(tevent(&["validate", "--config", &unknown_field]).status.code(), Some(2));

    // Noise periods no longer than R + C are rejected for scenario 2.
    let short = write_config(
        dir.path(),
        r#"{"scenario": "image2", "detectors": ["targeted-ddif"],
            "window": {"current": 1, "reference": 10, "tolerance": 1},
            "timeline": {"noise_len": 11, "uninteresting_len": 12}}"#,
    );
    let out = tevent(&["validate", "--config", &short]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise_len"));
}

#[test]
fn small_univariate_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = tevent(&[
        "run",
        "--preset",
        "fig4",
        "--out",
        out_dir.to_str().unwrap(),
        "--hit-trials",
        "300",
        "--false-alarm-steps",
        "3000",
        "--samples",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for det in ["targeted-dlik", "kolmogorov", "independent-kolmogorov", "monkey"] {
        let csv = fs::read_to_string(out_dir.join(det).join("roc.csv")).unwrap();
        assert!(csv.starts_with("tau,f,h\n"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join(det).join("roc.json")).unwrap()).unwrap();
        assert_eq!(json["seed"], 4);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["monte_carlo"]["hit_trials"], 300);
    assert!(out_dir.join("config.json").exists());
    assert!(out_dir.join("plot.gp").exists());
    assert!(out_dir.join("samples").join("targeted-dlik.csv").exists());
}

#[test]
fn small_image_run_with_uninteresting_events() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        r#"{"image": {"frame_size": 30, "box_size": 6, "training": {"quiescent_boxes": 500}},
            "monte_carlo": {"hit_trials": 60, "false_alarm_steps": 300, "boundary_trials": 5, "roc_points": 50}}"#,
    );
    let out = tevent(&["run", "--preset", "fig7-rc11", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let probs = summary["interval_state_probs"].as_array().unwrap();
    let total: f64 = probs.iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(out_dir.join("classifier.json").exists());
    assert!(out_dir.join("pixel-maxdiff").join("roc.csv").exists());
}
