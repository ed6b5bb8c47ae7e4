use std::f64::consts::PI;

use fracflat::flatness::dyadic_flatness_report;
use fracflat::geometry::GraphProfile;
use fracflat::harness::{
    calibrate, run, Calibration, CalibrationConfig, CalibrationFamily, ExperimentConfig, ExperimentKind,
};
use fracflat::solver::solve_minimal_graph;
use fracflat::Error;
use statrs::function::gamma::gamma;

fn config_field(json: &str) -> String {
    match ExperimentConfig::from_json(json) {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let cfg = ExperimentConfig::new(ExperimentKind::KernelCheck, 7, "unused");
    let a = run(&cfg, None).unwrap();
    let b = run(&cfg, None).unwrap();
    assert!(a.pass);
    assert_eq!(a.summary_json(), b.summary_json());
    assert_eq!(a.tables, b.tables);
}

#[test]
fn seed_changes_sampled_pairs() {
    let a = run(&ExperimentConfig::new(ExperimentKind::KernelCheck, 1, "unused"), None).unwrap();
    let b = run(&ExperimentConfig::new(ExperimentKind::KernelCheck, 2, "unused"), None).unwrap();
    assert_ne!(a.tables[0].rows, b.tables[0].rows);
    assert_ne!(a.config_sha256, b.config_sha256);
}

#[test]
fn report_files_are_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(ExperimentKind::KernelCheck, 3, dir.path());
    let rep = run(&cfg, None).unwrap();
    let files = rep.write(dir.path()).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"kernel_check.summary.json".to_string()));
    assert!(names.contains(&"kernel_check.checks.csv".to_string()));
    assert!(names.iter().any(|n| n.starts_with("kernel_check.") && n.ends_with(".csv") && n.contains("pairs")));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("kernel_check.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_sha256"], cfg.sha256());
    assert_eq!(summary["crate_version"], env!("CARGO_PKG_VERSION"));
    assert!(summary["calibration_version"].is_null());
    assert_eq!(summary["config"]["seed"], 3);

    let checks = std::fs::read_to_string(dir.path().join("kernel_check.checks.csv")).unwrap();
    assert!(checks.starts_with("name,value,relation,threshold,pass\n"));
}

#[test]
fn config_roundtrip_keeps_hash() {
    let cfg = ExperimentConfig::new(ExperimentKind::SolveAndVerify, 5, "out/x");
    let back = ExperimentConfig::from_json(&cfg.canonical_json()).unwrap();
    assert_eq!(back.sha256(), cfg.sha256());
}

#[test]
fn schema_errors_name_the_field() {
    let base = r#"{"kind": "estimate_sweep", "seed": 1, "output": "o", "params": PARAMS}"#;
    let with = |p: &str| base.replace("PARAMS", p);
    assert_eq!(config_field(&with(r#"{"radii": [1.0, "x"]}"#)), "params.radii[1]");
    assert_eq!(config_field(&with(r#"{"radii": [1.0, -0.5]}"#)), "params.radii[1]");
    assert_eq!(config_field(&with(r#"{"typo": 1}"#)), "params.typo");
    assert_eq!(config_field(&with(r#"{"plan": {"h": -1.0}}"#)), "params.plan");
    assert_eq!(config_field(r#"{"kind": "nope", "seed": 1, "output": "o"}"#), "kind");
    assert_eq!(config_field(r#"{"kind": "kernel_check", "output": "o"}"#), "seed");
    assert_eq!(config_field(r#"{"kind": "kernel_check", "seed": 1, "output": "o", "extra": 0}"#), "extra");
}

#[test]
fn zero_exterior_gives_flat_solution() {
    let out = solve_minimal_graph(&GraphProfile::zero(), 0.5, 1e-6).unwrap();
    assert!(out.converged);
    assert!(out.state.residual <= 1e-12);
    let points: Vec<Vec<f64>> = (-400..=400).map(|i| vec![i as f64 / 400.0, 0.0]).collect();
    let rep = dyadic_flatness_report(&points, &[0.0, 0.0], 4, 0.25).unwrap();
    assert!(rep.scales.iter().all(|sc| sc.width == 0.0));
    assert!(rep.alpha_fit.is_infinite());
}

#[test]
fn euclidean_calibration_has_closed_form_constants() {
    let cfg = CalibrationConfig {
        family: CalibrationFamily::Euclidean,
        ..CalibrationConfig::default()
    };
    let cal = calibrate(&cfg, 0).unwrap();
    assert_eq!(cal.c_effacement, 0.0);
    let (n, s) = (1.0f64, 0.5f64);
    let cns = 2f64.powf(s) * PI.powf(-n / 2.0) * gamma((n + s) / 2.0);
    let tail = 2.0 * PI.powf(n / 2.0) / gamma(n / 2.0) * cns / s;
    assert!((cal.c_tail - tail).abs() <= 1e-12 * tail);
}

#[test]
fn calibration_is_reproducible_and_reloads() {
    let a = calibrate(&CalibrationConfig::default(), 4).unwrap();
    let b = calibrate(&CalibrationConfig::default(), 4).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.c_effacement > 0.0 && a.c_effacement.is_finite());
    assert!(a.delta_harnack > 0.0 && a.delta_harnack < 1.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calibration.json");
    a.write(&path, false).unwrap();
    assert!(a.write(&path, false).is_err());
    let back = Calibration::load(&path).unwrap();
    assert_eq!(back.to_json(), a.to_json());
}
