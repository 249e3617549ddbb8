use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn fsci(args: &[&Path]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fsci"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn successful_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("dry_patch.toml");
    let (code, _) = fsci(&[Path::new("run"), &cfg, Path::new("--output-dir"), dir.path()]);
    assert_eq!(code, 0);
    assert!(dir.path().join("timeseries.csv").exists());
}

#[test]
fn check_prints_config() {
    let out = Command::new(env!("CARGO_BIN_EXE_fsci"))
        .arg("check")
        .arg(scenario("stamp_coarse.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("kappa0 = 0.1"));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\n[grid]\norigin = 1\n").unwrap();
    let (code, err) = fsci(&[Path::new("check"), &bad]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("error"));
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("dry_patch.toml")).unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, text.replace("tol = 1.0e-10", "tol = 1.0e-30\nmax_iter = 1")).unwrap();
    let out = dir.path().join("out");
    let (code, err) = fsci(&[Path::new("run"), &cfg, Path::new("--output-dir"), &out]);
    assert_eq!(code, 3, "{err}");
    assert!(out.join("failed.ckpt").exists());
}

#[test]
fn unwritable_output_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let (code, err) = fsci(&[Path::new("run"), &scenario("dry_patch.toml"), Path::new("--output-dir"), &blocker]);
    assert_eq!(code, 4, "{err}");
    let missing = dir.path().join("missing.toml");
    let (code, _) = fsci(&[Path::new("check"), &missing]);
    assert_eq!(code, 4);
}
