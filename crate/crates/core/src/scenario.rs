//! Building a [`Problem`] from a scenario file and running its time loop.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::config::{MeshConfig, ScenarioConfig};
use crate::coupling::Case;
use crate::error::{Error, Result};
use crate::fluid::{BcValue, FluidParams, SideBc};
use crate::geom::Vec2;
use crate::mesh::{FluidGrid, Side, SolidMesh};
use crate::postproc::{self, TimeSeriesRecord};
use crate::solid::{NeoHooke, SolidBody, SolidLoad};
use crate::solver::{nearest_grid_node, solve_steady, solve_step, Problem, SolidDirichlet, State, StepReport};

/// Generates or reads one mesh source.
pub fn build_mesh(m: &MeshConfig, base_dir: &Path) -> Result<SolidMesh> {
    let v = |a: &[f64; 2]| Vec2::new(a[0], a[1]);
    match m {
        MeshConfig::Rectangle { name, lo, hi, cells } => SolidMesh::rectangle(name, v(lo), v(hi), cells[0], cells[1]),
        MeshConfig::Disk {
            name,
            center,
            radius,
            cells,
        } => SolidMesh::disk(name, v(center), *radius, *cells),
        MeshConfig::Stamp {
            name,
            half_width,
            tip,
            top,
            radius,
            cells,
        } => {
            let (hw, tip, top, r) = (*half_width, *tip, *top, *radius);
            SolidMesh::mapped(name, cells[0], cells[1], |s, t| {
                let x = -hw + s * hw;
                let yb = tip + r - (r * r - x * x).sqrt();
                Vec2::new(x, yb + t * (top - yb))
            })
        }
        MeshConfig::File { path } => SolidMesh::read(&base_dir.join(path)),
    }
}

/// Assembles the discrete problem described by `cfg`. Mesh file paths are
/// resolved against `base_dir`.
pub fn build_problem(cfg: &ScenarioConfig, base_dir: &Path) -> Result<Problem> {
    let parts = cfg.meshes.iter().map(|m| build_mesh(m, base_dir)).collect::<Result<Vec<_>>>()?;
    let mut mesh = SolidMesh::merge(parts)?;
    for set in &cfg.interface.coupling {
        mesh.mark_coupling(set)?;
    }
    let mut bodies = Vec::with_capacity(mesh.n_bodies());
    for name in &mesh.body_names {
        let b = cfg
            .bodies
            .iter()
            .find(|b| &b.name == name)
            .ok_or_else(|| Error::Config(format!("body: no material for mesh body '{name}'")))?;
        let material = if b.rigid {
            NeoHooke::new(b.youngs.max(f64::MIN_POSITIVE), 0.0, b.density.max(0.0))?
        } else {
            NeoHooke::new(b.youngs, b.poisson, b.density)?
        };
        bodies.push(SolidBody { material, rigid: b.rigid });
    }
    for b in &cfg.bodies {
        if mesh.body_id(&b.name).is_none() {
            return Err(Error::Config(format!("body: '{}' does not appear in any mesh", b.name)));
        }
    }
    let solid_loads = cfg
        .solid_loads
        .iter()
        .map(|l| {
            Ok(SolidLoad {
                edges: mesh.edge_set(&l.edges)?,
                traction: l.traction.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let solid_dirichlet = cfg
        .solid_dirichlet
        .iter()
        .map(|d| {
            Ok(SolidDirichlet {
                nodes: mesh.edge_set_nodes(&d.edges)?,
                values: [d.ux.clone(), d.uy.clone()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = cfg
        .grid
        .as_ref()
        .map(|g| {
            FluidGrid::new(
                Vec2::new(g.origin[0], g.origin[1]),
                Vec2::new(g.extent[0], g.extent[1]),
                g.cells[0],
                g.cells[1],
            )
        })
        .transpose()?;
    let mut pressure_pin = None;
    let fluid = cfg.fluid.as_ref().map(|f| {
        let mut p = FluidParams::new(f.density, f.viscosity);
        p.body_force = f
            .body_force
            .as_ref()
            .map(|b| [BcValue::Time(b[0].clone()), BcValue::Time(b[1].clone())]);
        for s in Side::ALL {
            let c = f.bc.get(s);
            let tv = |x: &Option<crate::timefn::TimeFunction>| x.clone().map(BcValue::Time);
            *p.side_mut(s) = SideBc {
                dirichlet: [tv(&c.ux), tv(&c.uy)],
                traction: [tv(&c.tx), tv(&c.ty)],
            };
        }
        if let (Some(pin), Some(g)) = (&f.pressure_pin, &grid) {
            let n = nearest_grid_node(g, &Vec2::new(pin.point[0], pin.point[1]));
            pressure_pin = Some((n, BcValue::from(pin.value)));
        }
        p
    });
    Ok(Problem {
        grid,
        mesh,
        bodies,
        solid_loads,
        solid_dirichlet,
        fluid,
        pressure_pin,
        stab: cfg.stabilization.params(),
        interface: cfg.interface.params(),
        cut: cfg.cut.params(),
        newton: cfg.newton.params(),
        theta: cfg.time.theta,
    })
}

/// Diagnostics of one converged step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub record: TimeSeriesRecord,
    pub report: StepReport,
    /// Samples whose normal traction came from contact.
    pub contact_samples: usize,
    pub probe_velocity: Vec2,
}

/// Drives the time loop of a scenario one step at a time.
pub struct Runner {
    pub problem: Problem,
    pub state: State,
    pub probe: Option<Vec2>,
    levels: Vec<f64>,
    next: usize,
    steady: bool,
}

impl Runner {
    pub fn new(cfg: &ScenarioConfig, problem: Problem) -> Self {
        let mut state = State::initial(&problem);
        state.t = cfg.time.start;
        let levels = if cfg.time.steady {
            vec![cfg.time.schedule.last().map_or(cfg.time.start, |s| s[0])]
        } else {
            cfg.time.levels()
        };
        Runner {
            problem,
            state,
            probe: cfg.output.probe.map(|p| Vec2::new(p[0], p[1])),
            levels,
            next: 0,
            steady: cfg.time.steady,
        }
    }

    /// Continues from a restored state; time levels not after it are skipped.
    pub fn restart(&mut self, state: State) {
        self.next = self.levels.iter().take_while(|&&t| t <= state.t + 1e-12 * (1.0 + state.t.abs())).count();
        self.state = state;
    }

    pub fn remaining(&self) -> usize {
        self.levels.len() - self.next
    }

    fn probe_of(&self, field: &[f64]) -> Vec2 {
        self.probe
            .and_then(|p| postproc::probe_displacement(&self.problem.mesh, field, &p))
            .unwrap_or_else(Vec2::zeros)
    }

    /// Record of the current state using a cut and coupling diagnostics
    /// from `report`.
    pub fn record(&self, report: &StepReport) -> TimeSeriesRecord {
        let (mut phi, mut phi_f, mut phi_s) = (0.0, 0.0, 0.0);
        if let Some(grid) = &self.problem.grid {
            phi = postproc::flow_rate_boundary(grid, &report.cut, &self.state.fluid);
            phi_f = postproc::flow_rate_interface_fluid(grid, &report.cut, &self.state.fluid);
            phi_s = postproc::flow_rate_interface_solid(&self.problem.mesh, &report.cut, &self.state.solid_old.v);
        }
        let (err1, err2) = postproc::flow_rate_errors(phi, phi_f, phi_s);
        TimeSeriesRecord {
            t: self.state.t,
            phi,
            phi_f,
            phi_s,
            err1,
            err2,
            probe: self.probe_of(&self.state.u),
            newton_iters: report.iterations,
            ndof: report.ndof,
        }
    }

    /// Record of the initial state.
    pub fn initial(&self) -> Result<StepOutcome> {
        let cut = self.problem.build_cut(&self.state.u, None)?;
        let ndof = self.problem.dof_map(&cut).n;
        let report = StepReport {
            iterations: 0,
            norms: [0.0; 3],
            ndof,
            cut,
            record: Default::default(),
        };
        Ok(StepOutcome {
            record: self.record(&report),
            report,
            contact_samples: 0,
            probe_velocity: Vec2::zeros(),
        })
    }

    /// Advances to the next time level. Returns `None` when the schedule is
    /// exhausted.
    pub fn step(&mut self) -> Result<Option<StepOutcome>> {
        let Some(&t_new) = self.levels.get(self.next) else {
            return Ok(None);
        };
        let report = if self.steady {
            solve_steady(&self.problem, &mut self.state, t_new)?
        } else {
            let dt = t_new - self.state.t;
            solve_step(&self.problem, &mut self.state, dt)?
        };
        self.next += 1;
        let contact_samples = report
            .record
            .samples
            .iter()
            .filter(|s| matches!(s.case, Some(Case::CoveredContact) | Some(Case::WetContact)))
            .count();
        Ok(Some(StepOutcome {
            record: self.record(&report),
            contact_samples,
            probe_velocity: self.probe_of(&self.state.solid_old.v),
            report,
        }))
    }
}

/// Output switches of a run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    /// Overrides the field output interval of the scenario.
    pub write_fields_every: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub debug_cut: bool,
    pub debug_interface: bool,
    pub restart: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub records: Vec<TimeSeriesRecord>,
}

fn write(path: PathBuf, content: &str) -> Result<()> {
    fs::write(&path, content).map_err(|e| Error::io(&path, e))
}

/// Runs a scenario to the end of its schedule, writing the time series,
/// field files and checkpoints into `opts.output_dir`. On a failed step the
/// last converged state is dumped to `failed.ckpt` before the error is
/// returned.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let problem = build_problem(cfg, base_dir)?;
    let dir = &opts.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut runner = Runner::new(cfg, problem);
    if let Some(path) = &opts.restart {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let st = State::from_checkpoint(&text, &runner.problem)?;
        runner.restart(st);
    }
    let prefix = &cfg.output.prefix;
    let fields_every = opts.write_fields_every.unwrap_or(cfg.output.write_fields_every);
    let ckpt_every = opts.checkpoint_every.unwrap_or(cfg.output.checkpoint_every);
    let mut csv = String::from(postproc::CSV_HEADER);
    csv.push('\n');
    let first = runner.initial()?;
    csv.push_str(&first.record.csv_row());
    csv.push('\n');
    let mut records = vec![first.record.clone()];
    let write_fields = |runner: &Runner, out: &StepOutcome| -> Result<()> {
        let p = &runner.problem;
        let st = &runner.state;
        let step = st.step;
        if let Some(grid) = &p.grid {
            postproc::write_vtk(dir, prefix, "fluid", step, &postproc::grid_vtk(grid, &out.report.cut, &st.fluid))?;
        }
        postproc::write_vtk(dir, prefix, "solid", step, &postproc::solid_vtk(&p.mesh, &st.u, &st.solid_old.v))?;
        if opts.debug_cut {
            postproc::write_vtk(dir, prefix, "cut", step, &postproc::cut_vtk(&out.report.cut))?;
            postproc::write_vtk(dir, prefix, "samples", step, &postproc::samples_vtk(&out.report.cut, &out.report.record))?;
        }
        let tr = postproc::reconstruct_traction(&p.mesh, &st.u, &out.report.record);
        write(dir.join(format!("{prefix}_traction_{step:06}.csv")), &postproc::traction_csv(&tr))
    };
    if fields_every > 0 {
        write_fields(&runner, &first)?;
    }
    let mut last = first;
    let mut steps = 0;
    loop {
        let before = runner.state.clone();
        let out = match runner.step() {
            Ok(Some(o)) => o,
            Ok(None) => break,
            Err(e) => {
                write(dir.join("failed.ckpt"), &before.to_checkpoint())?;
                write(dir.join("timeseries.csv"), &csv)?;
                return Err(e);
            }
        };
        steps += 1;
        let step = runner.state.step;
        info!(
            "step {step} t={:.6} iters={} ndof={} contact_samples={} probe_uy={:.6e}",
            out.record.t, out.record.newton_iters, out.record.ndof, out.contact_samples, out.record.probe.y
        );
        csv.push_str(&out.record.csv_row());
        csv.push('\n');
        records.push(out.record.clone());
        if fields_every > 0 && step % fields_every == 0 {
            write_fields(&runner, &out)?;
        }
        if opts.debug_interface {
            write(
                dir.join(format!("{prefix}_interface_{step:06}.csv")),
                &postproc::interface_csv(&out.report.cut, &out.report.record),
            )?;
        }
        if ckpt_every > 0 && step % ckpt_every == 0 {
            write(dir.join(format!("{prefix}_{step:06}.ckpt")), &runner.state.to_checkpoint())?;
        }
        last = out;
    }
    write(dir.join("timeseries.csv"), &csv)?;
    let tr = postproc::reconstruct_traction(&runner.problem.mesh, &runner.state.u, &last.report.record);
    write(dir.join(format!("{prefix}_traction_final.csv")), &postproc::traction_csv(&tr))?;
    Ok(RunSummary {
        steps,
        final_time: runner.state.t,
        records,
    })
}
