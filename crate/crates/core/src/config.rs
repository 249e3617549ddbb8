//! Scenario description read from TOML.
//!
//! Every table rejects unknown keys. Optional tables fall back to the
//! defaults of the corresponding solver parameter structs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{InterfaceParams, Weighting};
use crate::cutcell::CutParams;
use crate::error::{Error, Result};
use crate::fluid::StabParams;
use crate::mesh::Side;
use crate::solver::NewtonParams;
use crate::timefn::TimeFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(rename = "mesh")]
    pub meshes: Vec<MeshConfig>,
    #[serde(rename = "body")]
    pub bodies: Vec<BodyConfig>,
    #[serde(default, rename = "solid_load", skip_serializing_if = "Vec::is_empty")]
    pub solid_loads: Vec<SolidLoadConfig>,
    #[serde(default, rename = "solid_dirichlet", skip_serializing_if = "Vec::is_empty")]
    pub solid_dirichlet: Vec<SolidDirichletConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidConfig>,
    #[serde(default)]
    pub interface: InterfaceConfig,
    #[serde(default)]
    pub cut: CutConfig,
    #[serde(default)]
    pub stabilization: StabConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub cells: [usize; 2],
}

/// Source of (part of) the solid mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    Rectangle {
        name: String,
        lo: [f64; 2],
        hi: [f64; 2],
        cells: [usize; 2],
    },
    Disk {
        name: String,
        center: [f64; 2],
        radius: f64,
        cells: usize,
    },
    /// Half of a rounded stamp: `x` in `[-half_width, 0]`, flat top at
    /// `top`, bottom on the circle of `radius` through `(0, tip)`.
    Stamp {
        name: String,
        half_width: f64,
        tip: f64,
        top: f64,
        radius: f64,
        cells: [usize; 2],
    },
    /// ASCII mesh file; relative paths are resolved against the directory
    /// of the scenario file.
    File { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub name: String,
    #[serde(default)]
    pub rigid: bool,
    #[serde(default = "one")]
    pub youngs: f64,
    #[serde(default)]
    pub poisson: f64,
    #[serde(default)]
    pub density: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidLoadConfig {
    /// Edge set name.
    pub edges: String,
    pub traction: [TimeFunction; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidDirichletConfig {
    pub edges: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<TimeFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    pub density: f64,
    pub viscosity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<[TimeFunction; 2]>,
    #[serde(default)]
    pub bc: SideBcs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_pin: Option<PressurePin>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideBcs {
    #[serde(default)]
    pub bottom: SideBcConfig,
    #[serde(default)]
    pub right: SideBcConfig,
    #[serde(default)]
    pub top: SideBcConfig,
    #[serde(default)]
    pub left: SideBcConfig,
}

impl SideBcs {
    pub fn get(&self, s: Side) -> &SideBcConfig {
        match s {
            Side::Bottom => &self.bottom,
            Side::Right => &self.right,
            Side::Top => &self.top,
            Side::Left => &self.left,
        }
    }
}

/// Velocity components (`ux`, `uy`) are prescribed strongly; traction
/// components (`tx`, `ty`) act on components without a velocity value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideBcConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<TimeFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressurePin {
    pub point: [f64; 2],
    #[serde(default)]
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingConfig {
    Harmonic,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterfaceConfig {
    /// Edge sets taking part in fluid coupling and contact.
    pub coupling: Vec<String>,
    pub gamma_f0: f64,
    pub gamma_t0: f64,
    pub gamma_s0: f64,
    pub kappa0: f64,
    pub weighting: WeightingConfig,
}

impl Default for InterfaceConfig {
    fn default() -> Self {
        let d = InterfaceParams::default();
        InterfaceConfig {
            coupling: Vec::new(),
            gamma_f0: d.gamma_f0,
            gamma_t0: d.gamma_t0,
            gamma_s0: d.gamma_s0,
            kappa0: d.kappa0,
            weighting: WeightingConfig::Harmonic,
        }
    }
}

impl InterfaceConfig {
    pub fn params(&self) -> InterfaceParams {
        InterfaceParams {
            gamma_f0: self.gamma_f0,
            gamma_t0: self.gamma_t0,
            gamma_s0: self.gamma_s0,
            kappa0: self.kappa0,
            weighting: match self.weighting {
                WeightingConfig::Harmonic => Weighting::Harmonic,
                WeightingConfig::Equal => Weighting::Equal,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutConfig {
    pub tol: f64,
    pub island_ratio: f64,
    pub volume_degree: usize,
    pub interface_points: usize,
    pub contact_multiplier: usize,
    pub fluid_points: usize,
}

impl Default for CutConfig {
    fn default() -> Self {
        let d = CutParams::default();
        CutConfig {
            tol: d.tol,
            island_ratio: d.island_ratio,
            volume_degree: d.volume_degree,
            interface_points: d.interface_points,
            contact_multiplier: d.contact_multiplier,
            fluid_points: d.fluid_points,
        }
    }
}

impl CutConfig {
    pub fn params(&self) -> CutParams {
        CutParams {
            tol: self.tol,
            island_ratio: self.island_ratio,
            volume_degree: self.volume_degree,
            interface_points: self.interface_points,
            contact_multiplier: self.contact_multiplier,
            fluid_points: self.fluid_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabConfig {
    pub gamma_p: f64,
    pub gamma_v: f64,
    pub gamma_ghost_v: f64,
    pub gamma_ghost_p: f64,
    pub cip: bool,
    pub ghost: bool,
}

impl Default for StabConfig {
    fn default() -> Self {
        let d = StabParams::default();
        StabConfig {
            gamma_p: d.gamma_p,
            gamma_v: d.gamma_v,
            gamma_ghost_v: d.gamma_ghost_v,
            gamma_ghost_p: d.gamma_ghost_p,
            cip: d.cip,
            ghost: d.ghost,
        }
    }
}

impl StabConfig {
    pub fn params(&self) -> StabParams {
        StabParams {
            gamma_p: self.gamma_p,
            gamma_v: self.gamma_v,
            gamma_ghost_v: self.gamma_ghost_v,
            gamma_ghost_p: self.gamma_ghost_p,
            cip: self.cip,
            ghost: self.ghost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub start: f64,
    /// Piecewise constant step sizes as `[t_end, dt]` pairs.
    #[serde(default)]
    pub schedule: Vec<[f64; 2]>,
    /// Solve a single stationary problem instead of time stepping.
    #[serde(default)]
    pub steady: bool,
}

impl TimeConfig {
    /// Time levels after `start`, in order.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.start;
        for &[t_end, dt] in &self.schedule {
            let n = ((t_end - t) / dt - 1e-9).ceil().max(0.0) as usize;
            let t0 = t;
            for k in 1..=n {
                out.push((t0 + k as f64 * dt).min(t_end));
            }
            t = t_end.max(t);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub growth_after: usize,
    /// Geometry freeze threshold relative to the grid size.
    pub eps_geom: f64,
    pub omega_min: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let d = NewtonParams::default();
        NewtonConfig {
            tol: d.tol,
            max_iter: d.max_iter,
            growth_after: d.growth_after,
            eps_geom: d.eps_geom,
            omega_min: d.omega_min,
        }
    }
}

impl NewtonConfig {
    pub fn params(&self) -> NewtonParams {
        NewtonParams {
            tol: self.tol,
            max_iter: self.max_iter,
            growth_after: self.growth_after,
            eps_geom: self.eps_geom,
            omega_min: self.omega_min,
            ..NewtonParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// File name prefix of field and traction files.
    pub prefix: String,
    /// Reference position of the solid probe point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<[f64; 2]>,
    /// Field output interval in steps (0 disables).
    pub write_fields_every: usize,
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            prefix: "run".into(),
            probe: None,
            write_fields_every: 0,
            checkpoint_every: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable in TOML")
    }

    /// Semantic checks that do not need the meshes.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config(format!("{key}: {msg}")));
        if let Some(g) = &self.grid {
            if !(g.extent[0] > 0.0 && g.extent[1] > 0.0) {
                return bad("grid.extent", "must be positive");
            }
            if g.cells[0] == 0 || g.cells[1] == 0 {
                return bad("grid.cells", "must be positive");
            }
        }
        if self.meshes.is_empty() {
            return bad("mesh", "at least one mesh is required");
        }
        for (i, m) in self.meshes.iter().enumerate() {
            let ok = match m {
                MeshConfig::Rectangle { lo, hi, cells, .. } => hi[0] > lo[0] && hi[1] > lo[1] && cells[0] > 0 && cells[1] > 0,
                MeshConfig::Disk { radius, cells, .. } => *radius > 0.0 && *cells > 0,
                MeshConfig::Stamp {
                    half_width,
                    tip,
                    top,
                    radius,
                    cells,
                    ..
                } => *half_width > 0.0 && *radius > *half_width && top > tip && cells[0] > 0 && cells[1] > 0,
                MeshConfig::File { path } => !path.is_empty(),
            };
            if !ok {
                return bad(&format!("mesh[{i}]"), "invalid generator parameters");
            }
        }
        for (i, b) in self.bodies.iter().enumerate() {
            let key = format!("body[{i}]");
            if self.bodies[..i].iter().any(|o| o.name == b.name) {
                return bad(&format!("{key}.name"), &format!("duplicate body '{}'", b.name));
            }
            if !b.rigid {
                crate::solid::NeoHooke::new(b.youngs, b.poisson, b.density)
                    .map_err(|e| Error::Config(format!("{key}: {e}")))?;
            }
        }
        for (i, l) in self.solid_loads.iter().enumerate() {
            for (c, f) in l.traction.iter().enumerate() {
                f.validate(&format!("solid_load[{i}].traction[{c}]"))?;
            }
        }
        for (i, d) in self.solid_dirichlet.iter().enumerate() {
            if d.ux.is_none() && d.uy.is_none() {
                return bad(&format!("solid_dirichlet[{i}]"), "needs ux or uy");
            }
        }
        if let Some(f) = &self.fluid {
            if self.grid.is_none() {
                return bad("fluid", "a fluid needs a grid");
            }
            if !(f.density >= 0.0) {
                return bad("fluid.density", "must be non-negative");
            }
            if !(f.viscosity > 0.0) {
                return bad("fluid.viscosity", "must be positive");
            }
            for s in Side::ALL {
                let bc = f.bc.get(s);
                for (k, v) in [("ux", &bc.ux), ("uy", &bc.uy), ("tx", &bc.tx), ("ty", &bc.ty)] {
                    if let Some(v) = v {
                        v.validate(&format!("fluid.bc.{}.{k}", s.name()))?;
                    }
                }
            }
        }
        let t = &self.time;
        if !(t.theta > 0.0 && t.theta <= 1.0) {
            return bad("time.theta", "must lie in (0, 1]");
        }
        let mut prev = t.start;
        for (i, &[t_end, dt]) in t.schedule.iter().enumerate() {
            if !(dt > 0.0) {
                return bad(&format!("time.schedule[{i}]"), "step size must be positive");
            }
            if !(t_end > prev) {
                return bad(&format!("time.schedule[{i}]"), "end times must increase");
            }
            prev = t_end;
        }
        let n = &self.newton;
        if !(n.tol > 0.0) {
            return bad("newton.tol", "must be positive");
        }
        if !(n.omega_min > 0.0 && n.omega_min <= 1.0) {
            return bad("newton.omega_min", "must lie in (0, 1]");
        }
        if n.max_iter == 0 {
            return bad("newton.max_iter", "must be positive");
        }
        if !(self.interface.kappa0 >= 0.0) || !(self.interface.gamma_f0 > 0.0) || !(self.interface.gamma_s0 > 0.0) || !(self.interface.gamma_t0 > 0.0) {
            return bad("interface", "penalty factors must be positive and kappa0 non-negative");
        }
        if !(self.cut.island_ratio >= 0.0) || self.cut.interface_points == 0 || self.cut.fluid_points == 0 {
            return bad("cut", "invalid quadrature or island settings");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[mesh]]
type = "rectangle"
name = "block"
lo = [0.0, 0.0]
hi = [1.0, 1.0]
cells = [2, 2]

[[body]]
name = "block"
youngs = 10.0

[time]
schedule = [[1.0, 0.5]]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.time.theta, 1.0);
        assert_eq!(c.interface.gamma_s0, 1.0);
        assert_eq!(c.interface.kappa0, 0.1);
        assert_eq!(c.newton.max_iter, 50);
        assert_eq!(c.newton.growth_after, 15);
        assert_eq!(c.cut.island_ratio, 2.0);
        assert_eq!(c.output.prefix, "run");
        assert_eq!(c.time.levels(), vec![0.5, 1.0]);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("youngs = 10.0", "youngs = 10.0\nyoungz = 3.0");
        let e = ScenarioConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("youngz"), "{e}");
        let e = ScenarioConfig::parse(&format!("{MINIMAL}\n[newton]\ntoll = 1.0\n")).unwrap_err().to_string();
        assert!(e.contains("toll"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let text = MINIMAL.replace("schedule = [[1.0, 0.5]]", "schedule = [[1.0, -0.5]]");
        let e = ScenarioConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("time.schedule[0]"), "{e}");
        let text = MINIMAL.replace("youngs = 10.0", "youngs = 10.0\npoisson = 0.5");
        let e = ScenarioConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("body[0]"), "{e}");
    }

    #[test]
    fn roundtrip() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        let again = ScenarioConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn schedule_levels_hit_segment_ends() {
        let t = TimeConfig {
            theta: 1.0,
            start: 0.0,
            schedule: vec![[0.3, 0.1], [1.0, 0.35]],
            steady: false,
        };
        let l = t.levels();
        assert_eq!(l.len(), 5);
        assert!((l[2] - 0.3).abs() < 1e-12);
        assert!((l[3] - 0.65).abs() < 1e-12);
        assert_eq!(l[4], 1.0);
    }
}
