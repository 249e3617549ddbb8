use std::path::{Path, PathBuf};

use fsci::config::ScenarioConfig;
use fsci::postproc::CSV_HEADER;
use fsci::scenario::{run_scenario, RunOptions};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::read(&scenarios_dir().join(name)).unwrap()
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        output_dir: dir.to_path_buf(),
        ..RunOptions::default()
    }
}

#[test]
fn empty_schedule_writes_initial_row() {
    let mut cfg = load("stamp_coarse.toml");
    cfg.time.schedule.clear();
    let dir = tempfile::tempdir().unwrap();
    let sum = run_scenario(&cfg, &scenarios_dir(), &opts(dir.path())).unwrap();
    assert_eq!(sum.steps, 0);
    let csv = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("0.0000000000e0,"));
}

#[test]
fn dry_patch_traction_output() {
    let cfg = load("dry_patch.toml");
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&cfg, &scenarios_dir(), &opts(dir.path())).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("patch_traction_final.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        // Seam nodes only: normal traction close to the applied load.
        if (v[2] - 0.5).abs() < 0.01 {
            assert!((v[4].abs() - 1.0).abs() < 0.02, "{line}");
            assert_eq!(v[5], 0.0);
            rows += 1;
        }
    }
    assert!(rows >= 10);
}

#[test]
fn poiseuille_conserves_mass() {
    let cfg = load("poiseuille.toml");
    let dir = tempfile::tempdir().unwrap();
    let sum = run_scenario(&cfg, &scenarios_dir(), &opts(dir.path())).unwrap();
    let last = sum.records.last().unwrap();
    assert!(last.err1 < 1e-10 && last.err2 < 1e-10);
    assert!(dir.path().join("channel_fluid_000000.vtk").exists());
}
