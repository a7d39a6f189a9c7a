use std::path::Path;
use std::process::Command;

use robin_lab::run::{summarize_json, summarize_text};
use robin_lab::{read_manifest, run, summarize, ExperimentConfig, LabError, RunOptions};

const BALL_CURVATURE: &str = r#"{
    "domain": {"n": 2, "shape": {"kind": "ball", "radius": 1.0}, "collar": 0.5},
    "sequence": {"target": [[0, 0], [1, 0]], "count": 6},
    "checks": [{"kind": "curvature"}],
    "seed": 3
}"#;

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out: Some(dir.to_path_buf()),
        seed: None,
        jobs: Some(1),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robin-lab"))
}

#[test]
fn ball_curvature_passes_with_constant_limit_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(BALL_CURVATURE).unwrap();
    let m = run(&cfg, &opts(dir.path())).unwrap();
    assert!(m.pass);
    assert_eq!(m.exit_code(), 0);
    let csv = std::fs::read_to_string(dir.path().join("00_curvature_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "nu,delta,raw,\"R(p_nu, v_N)\",target,error");
    for l in lines {
        let v: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!((v + 1.0).abs() < 1e-6, "{l}");
    }
    let text = summarize(dir.path()).unwrap();
    assert!(
        text.contains("curvature R(p_nu, v_N): estimated limit -1.000000, target -1, PASS"),
        "{text}"
    );
}

#[test]
fn identical_config_and_seed_reproduce_artifacts() {
    let cfg = ExperimentConfig::from_json(
        &BALL_CURVATURE.replace(
            "[{\"kind\": \"curvature\"}]",
            "[{\"kind\": \"curvature\"}, {\"kind\": \"comparability\", \"samples\": 20}]",
        ),
    )
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&cfg, &opts(a.path())).unwrap();
    let mb = run(&cfg, &RunOptions { jobs: None, ..opts(b.path()) }).unwrap();
    assert_eq!(ma.config_hash, mb.config_hash);
    assert!(!ma.files.is_empty());
    for (fa, fb) in ma.files.iter().zip(&mb.files) {
        assert_eq!(fa.path, fb.path);
        assert_eq!(fa.sha256, fb.sha256, "{}", fa.path);
        let x = std::fs::read(a.path().join(&fa.path)).unwrap();
        let y = std::fs::read(b.path().join(&fb.path)).unwrap();
        assert_eq!(x, y);
    }
    // the seed is part of the hashed configuration
    let c = tempfile::tempdir().unwrap();
    let mc = run(
        &cfg,
        &RunOptions {
            seed: Some(99),
            ..opts(c.path())
        },
    )
    .unwrap();
    assert_ne!(mc.config_hash, ma.config_hash);
    assert_eq!(mc.seed, 99);
}

#[test]
fn unknown_key_is_rejected_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let bad = BALL_CURVATURE.replace("\"seed\": 3", "\"seed\": 3, \"verbose\": true");
    assert!(matches!(ExperimentConfig::from_json(&bad), Err(LabError::ConfigInvalid(_))));
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let status = bin()
        .args(["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
    let status = bin().args(["validate", "--config", path.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn semantic_config_error_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = ExperimentConfig::from_json(&BALL_CURVATURE.replace("[1, 0]]", "[0.9, 0]]")).unwrap();
    let err = run(&cfg, &opts(&out)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn empty_directory_has_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_manifest(dir.path()), Err(LabError::MissingManifest(_))));
    let status = bin().args(["summarize", dir.path().to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn failing_check_is_recorded_and_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    // an unattainable tolerance next to a passing check
    let cfg = ExperimentConfig::from_json(&BALL_CURVATURE.replace(
        "[{\"kind\": \"curvature\"}]",
        "[{\"kind\": \"curvature\", \"tolerance\": 1e-300}, {\"kind\": \"scaled_derivatives\"}]",
    ))
    .unwrap();
    let m = run(&cfg, &opts(dir.path())).unwrap();
    assert!(!m.pass);
    assert_eq!(m.exit_code(), 1);
    assert!(!m.checks[0].pass);
    assert!(m.checks[1].pass);
    let text = summarize_text(&m);
    assert!(text.ends_with("overall: FAIL\n"));
    assert_eq!(summarize_json(&m)["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn ratio_check_reports_normal_and_tangential_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&BALL_CURVATURE.replace(
        "[{\"kind\": \"curvature\"}]",
        "[{\"kind\": \"ratio\", \"samples\": 50}]",
    ))
    .unwrap();
    let m = run(&cfg, &opts(dir.path())).unwrap();
    assert!(m.pass, "{}", summarize_text(&m));
    let lines = &m.checks[0].lines;
    assert!((lines[0].estimated_limit.unwrap() - 2.0).abs() < 1e-3);
    assert!(lines[1].estimated_limit.unwrap().abs() < 1e-3);
    let csv = std::fs::read_to_string(dir.path().join("00_ratio_0.csv")).unwrap();
    assert!(csv.starts_with("nu,delta,raw,|eta(v_N)|^2/ds^2,target,error"));
}

#[test]
fn ellipsoid_scaled_derivatives_value_passes_at_small_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(
        r#"{
        "domain": {"n": 2, "shape": {"kind": "ellipsoid", "semi_axes": [1.0, 0.5]}, "collar": 0.2},
        "engine": {"kind": "collocation", "config": {}},
        "sequence": {"target": [[0, 0], [0.5, 0]], "count": 7},
        "checks": [{"kind": "scaled_derivatives", "tolerance": 5e-2}]
    }"#,
    )
    .unwrap();
    let m = run(&cfg, &opts(dir.path())).unwrap();
    assert!(m.pass, "{}", summarize_text(&m));
    let csv = std::fs::read_to_string(dir.path().join("00_scaled_derivatives_0.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let delta: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(delta < 1e-3);
}

#[test]
fn oracle_subcommand_passes() {
    let out = bin().args(["oracle", "--fast"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ball Lambda(0, 0.5), n=2"));
    assert!(!text.contains("FAIL"));
}
