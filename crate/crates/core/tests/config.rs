use std::path::PathBuf;

use proptest::prelude::*;

use fsci::config::{ScenarioConfig, SolidLoadConfig};
use fsci::timefn::{Shape, TimeFunction};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn stamp_interface_parameters() {
    let cfg = ScenarioConfig::read(&scenario("stamp_coarse.toml")).unwrap();
    assert_eq!(cfg.interface.kappa0, 0.1);
    assert_eq!(cfg.interface.gamma_s0, 1.0);
    let g = cfg.grid.as_ref().unwrap();
    assert_eq!(g.cells, [16, 24]);
    assert_eq!(cfg.time.theta, 1.0);
    assert_eq!(cfg.time.levels().last().copied(), Some(2500.0));
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["stamp_coarse.toml", "dry_patch.toml", "poiseuille.toml"] {
        let cfg = ScenarioConfig::read(&scenario(name)).unwrap();
        assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = std::fs::read_to_string(scenario("dry_patch.toml")).unwrap();
    assert!(ScenarioConfig::parse(&text.replace("[newton]", "[newton]\ntolerance = 1.0")).is_err());
    assert!(ScenarioConfig::parse(&text.replace("youngs = 300.0", "youngs = \"hard\"")).is_err());
}

#[test]
fn schedule_levels() {
    let text = std::fs::read_to_string(scenario("dry_patch.toml")).unwrap();
    let mut cfg = ScenarioConfig::parse(&text).unwrap();
    cfg.time.schedule = vec![[0.3, 0.1], [1.0, 0.25]];
    let levels = cfg.time.levels();
    let expected = [0.1, 0.2, 0.3, 0.55, 0.8, 1.0];
    assert_eq!(levels.len(), expected.len());
    for (a, b) in levels.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn toml_round_trip(
        e in 1e-3f64..1e6,
        nu in 0.0f64..0.49,
        k0 in 0.0f64..1.0,
        slope in -1.0f64..1.0,
        start in 0.0f64..100.0,
        dt in 1e-4f64..1.0,
        q in -5.0f64..5.0,
    ) {
        let text = std::fs::read_to_string(scenario("stamp_coarse.toml")).unwrap();
        let mut cfg = ScenarioConfig::parse(&text).unwrap();
        cfg.bodies[0].youngs = e;
        cfg.bodies[0].poisson = nu;
        cfg.interface.kappa0 = k0;
        cfg.time.schedule[0][1] = dt;
        cfg.solid_loads = vec![SolidLoadConfig {
            edges: "stamp.top".into(),
            traction: [
                TimeFunction::Value(q),
                TimeFunction::Shape(Shape::Ramp { start, slope, offset: q }),
            ],
        }];
        let back = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
