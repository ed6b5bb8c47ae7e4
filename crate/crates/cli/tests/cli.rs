use std::path::Path;
use std::process::{Command, Output};

fn fracflat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracflat"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn kernel_check_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fracflat(&["kernel", "--seed", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("kernel_check: pass"));
    assert!(dir.path().join("kernel_check.summary.json").exists());
    assert!(dir.path().join("kernel_check.checks.csv").exists());
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "nmc.json",
        r#"{"kind": "nmc_eval", "seed": 0, "output": "o",
            "params": {"region": {"variant": "ball", "center": [0.0, 0.0], "radius": 1.0, "inside": true},
                       "point": [1.0, 0.0], "s": 0.5, "expected": 0.0}}"#,
    );
    let o = fracflat(&["nmc", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL deviation_from_expected"));
}

#[test]
fn bad_config_exits_with_two_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"kind": "kernel_check", "seed": 0, "output": "o", "params": {"s_values": [0.5, 1.5]}}"#,
    );
    let o = fracflat(&["kernel", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.s_values[1]"));
}

#[test]
fn subcommand_must_match_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", r#"{"kind": "kernel_check", "seed": 0, "output": "o"}"#);
    let o = fracflat(&["heat", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    std::fs::write(dir.path().join("calibration.json"), "{}").unwrap();
    let o = fracflat(&["calibrate", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--overwrite"));
    assert_eq!(std::fs::read_to_string(dir.path().join("calibration.json")).unwrap(), "{}");
}
