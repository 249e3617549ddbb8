//! Monolithic assembly and the damped Newton iteration of one time step.

use log::{debug, warn};

use crate::coupling::{assemble_coupling, CouplingContext, CouplingRecord, InterfaceParams};
use crate::cutcell::{build_cut_state, check_extension, CutParams, CutState};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fluid::{assemble_fluid, BcValue, FluidContext, FluidField, FluidHistory, FluidParams, StabParams};
use crate::geom::Vec2;
use crate::linalg::{sparse_solve, Assembler, DofMap, Field};
use crate::mesh::{FluidGrid, Side, SolidMesh};
use crate::solid::{assemble_solid, SolidBody, SolidHistory, SolidLoad};
use crate::timefn::{TimeFunction, TimeScheme};

#[derive(Clone, Debug)]
pub struct NewtonParams {
    /// Tolerance on the RMS residual of each field.
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration after which the fluid unknown set may only grow.
    pub growth_after: usize,
    /// Geometry is re-intersected while the displacement increment exceeds
    /// this multiple of the grid size.
    pub eps_geom: f64,
    pub omega_min: f64,
    pub omega_shrink: f64,
    pub omega_grow: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tol: 1e-9,
            max_iter: 50,
            growth_after: 15,
            eps_geom: 1e-3,
            omega_min: 0.05,
            omega_shrink: 0.5,
            omega_grow: 1.5,
        }
    }
}

/// Prescribed solid displacement components on a node set.
#[derive(Clone, Debug)]
pub struct SolidDirichlet {
    pub nodes: Vec<usize>,
    pub values: [Option<TimeFunction>; 2],
}

/// Complete discrete problem description.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: Option<FluidGrid>,
    pub mesh: SolidMesh,
    pub bodies: Vec<SolidBody>,
    pub solid_loads: Vec<SolidLoad>,
    pub solid_dirichlet: Vec<SolidDirichlet>,
    pub fluid: Option<FluidParams>,
    /// Grid node whose pressure is prescribed (for enclosed flows).
    pub pressure_pin: Option<(usize, BcValue)>,
    pub stab: StabParams,
    pub interface: InterfaceParams,
    pub cut: CutParams,
    pub newton: NewtonParams,
    pub theta: f64,
}

impl Problem {
    pub fn h(&self) -> f64 {
        match &self.grid {
            Some(g) => g.h(),
            None => self
                .mesh
                .boundary
                .iter()
                .map(|b| b.length0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn rigid_mask(&self) -> Vec<bool> {
        self.bodies.iter().map(|b| b.rigid).collect()
    }

    /// Solid unknowns with prescribed values.
    pub fn solid_dirichlet_mask(&self) -> Vec<bool> {
        let mut m = vec![false; 2 * self.mesh.nodes.len()];
        for (b, body) in self.bodies.iter().enumerate() {
            if body.rigid {
                for n in self.mesh.body_nodes(b) {
                    m[2 * n] = true;
                    m[2 * n + 1] = true;
                }
            }
        }
        for d in &self.solid_dirichlet {
            for &n in &d.nodes {
                for c in 0..2 {
                    if d.values[c].is_some() {
                        m[2 * n + c] = true;
                    }
                }
            }
        }
        m
    }

    fn set_solid_dirichlet(&self, u: &mut [f64], t: f64) {
        for (b, body) in self.bodies.iter().enumerate() {
            if body.rigid {
                for n in self.mesh.body_nodes(b) {
                    u[2 * n] = 0.0;
                    u[2 * n + 1] = 0.0;
                }
            }
        }
        for d in &self.solid_dirichlet {
            for &n in &d.nodes {
                for c in 0..2 {
                    if let Some(v) = &d.values[c] {
                        u[2 * n + c] = v.eval(t);
                    }
                }
            }
        }
    }

    /// Prescribed value of velocity component `c` at grid node `n`.
    fn fluid_dirichlet(&self, n: usize, c: usize) -> Option<&BcValue> {
        let grid = self.grid.as_ref()?;
        let fluid = self.fluid.as_ref()?;
        let (i, j) = grid.node_ij(n);
        let sides = [
            (j == 0, Side::Bottom),
            (i == grid.nx, Side::Right),
            (j == grid.ny, Side::Top),
            (i == 0, Side::Left),
        ];
        sides
            .iter()
            .filter(|(on, _)| *on)
            .find_map(|(_, s)| fluid.side(*s).dirichlet[c].as_ref())
    }

    /// Builds the unknown numbering for an active node set and marks
    /// prescribed unknowns.
    pub fn dof_map(&self, cut: &CutState) -> DofMap {
        let active: &[bool] = if self.grid.is_some() { &cut.active_nodes } else { &[] };
        let mut dm = DofMap::new(self.mesh.nodes.len(), active);
        for (i, m) in self.solid_dirichlet_mask().into_iter().enumerate() {
            dm.dirichlet[i] = m;
        }
        for n in 0..dm.fluid_base.len() {
            if let Some(b) = dm.fluid_base[n] {
                for c in 0..2 {
                    if self.fluid_dirichlet(n, c).is_some() {
                        dm.dirichlet[b + c] = true;
                    }
                }
            }
        }
        if let Some((n, _)) = &self.pressure_pin {
            if let Some(b) = dm.fluid_base.get(*n).copied().flatten() {
                dm.dirichlet[b + 2] = true;
            }
        }
        dm
    }

    fn set_fluid_dirichlet(&self, dm: &DofMap, fluid: &mut FluidField, t: f64) {
        let Some(grid) = &self.grid else { return };
        for n in 0..dm.fluid_base.len() {
            if dm.fluid_base[n].is_none() {
                continue;
            }
            let x = grid.node_pos(n);
            for c in 0..2 {
                if let Some(v) = self.fluid_dirichlet(n, c) {
                    fluid.v[n][c] = v.eval(&x, t);
                }
            }
        }
        if let Some((n, v)) = &self.pressure_pin {
            if dm.fluid_base.get(*n).copied().flatten().is_some() {
                fluid.p[*n] = v.eval(&grid.node_pos(*n), t);
            }
        }
    }

    pub fn build_cut(&self, u: &[f64], retained: Option<&[bool]>) -> Result<CutState> {
        let cs = build_cut_state(self.grid.as_ref(), &self.mesh, u, &self.cut, retained)?;
        check_extension(&cs, &self.rigid_mask())?;
        Ok(cs)
    }
}

/// Solution at one time level together with the old-level history.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub step: usize,
    pub u: Vec<f64>,
    pub fluid: FluidField,
    pub solid_old: SolidHistory,
    pub fluid_old: FluidHistory,
}

impl State {
    pub fn initial(problem: &Problem) -> Self {
        let ns = problem.mesh.nodes.len();
        let nf = problem.grid.as_ref().map_or(0, |g| g.n_nodes());
        State {
            t: 0.0,
            step: 0,
            u: vec![0.0; 2 * ns],
            fluid: FluidField::zeros(nf),
            solid_old: SolidHistory::zeros(ns),
            fluid_old: FluidHistory::zeros(nf),
        }
    }
}

/// Copies the unknowns of the current iterate into a global vector.
pub fn gather(dm: &DofMap, u: &[f64], fluid: &FluidField) -> Vec<f64> {
    let mut x = vec![0.0; dm.n];
    x[..u.len()].copy_from_slice(u);
    for (n, b) in dm.fluid_base.iter().enumerate() {
        if let Some(b) = *b {
            x[b] = fluid.v[n].x;
            x[b + 1] = fluid.v[n].y;
            x[b + 2] = fluid.p[n];
        }
    }
    x
}

/// Inverse of [`gather`].
pub fn scatter(dm: &DofMap, x: &[f64], u: &mut [f64], fluid: &mut FluidField) {
    let ns = u.len();
    u.copy_from_slice(&x[..ns]);
    for (n, b) in dm.fluid_base.iter().enumerate() {
        if let Some(b) = *b {
            fluid.v[n] = Vec2::new(x[b], x[b + 1]);
            fluid.p[n] = x[b + 2];
        }
    }
}

/// Inputs of one residual evaluation besides the iterate.
pub struct StepContext<'a> {
    pub problem: &'a Problem,
    pub cut: &'a CutState,
    pub dofs: &'a DofMap,
    pub scheme: TimeScheme,
    pub t: f64,
    pub solid_old: &'a SolidHistory,
    pub fluid_old: &'a FluidHistory,
}

/// Assembles the full residual (and Jacobian) without Dirichlet elimination.
pub fn assemble_raw(
    sc: &StepContext,
    u: &[f64],
    fluid: &FluidField,
    with_matrix: bool,
    record: Option<&mut CouplingRecord>,
) -> Result<Assembler> {
    let p = sc.problem;
    let mut asm = Assembler::new(sc.dofs.n, with_matrix);
    assemble_solid(&p.mesh, &p.bodies, &p.solid_loads, u, sc.solid_old, &sc.scheme, sc.t, &mut asm)?;
    if let (Some(grid), Some(fp)) = (&p.grid, &p.fluid) {
        let ctx = FluidContext {
            grid,
            cut: sc.cut,
            dofs: sc.dofs,
            params: fp,
            stab: &p.stab,
            scheme: &sc.scheme,
            old: sc.fluid_old,
            fluid_points: p.cut.fluid_points,
            t: sc.t,
        };
        assemble_fluid(&ctx, fluid, &mut asm);
    }
    let cctx = CouplingContext {
        grid: p.grid.as_ref(),
        cut: sc.cut,
        dofs: sc.dofs,
        mesh: &p.mesh,
        bodies: &p.bodies,
        fluid: p.fluid.as_ref(),
        params: &p.interface,
        scheme: &sc.scheme,
        fluid_old: p.grid.as_ref().map(|_| sc.fluid_old),
        solid_old: sc.solid_old,
        h: p.h(),
    };
    assemble_coupling(&cctx, u, p.grid.as_ref().map(|_| fluid), &mut asm, record)?;
    Ok(asm)
}

/// Zeroes prescribed rows and columns and puts ones on their diagonal.
pub fn eliminate_dirichlet(asm: &mut Assembler, dm: &DofMap) {
    for i in 0..dm.n {
        if dm.dirichlet[i] {
            asm.r[i] = 0.0;
        }
    }
    if asm.with_matrix {
        asm.trip.retain(|&(i, j, _)| !dm.dirichlet[i] && !dm.dirichlet[j]);
        for i in 0..dm.n {
            if dm.dirichlet[i] {
                asm.trip.push((i, i, 1.0));
            }
        }
    }
}

/// RMS residual of the solid, momentum and continuity rows.
pub fn field_norms(r: &[f64], dm: &DofMap) -> [f64; 3] {
    let mut s = [0.0; 3];
    let mut c = [0usize; 3];
    for (i, v) in r.iter().enumerate() {
        if dm.dirichlet[i] {
            continue;
        }
        let k = match dm.field(i) {
            Field::Solid => 0,
            Field::Momentum => 1,
            Field::Continuity => 2,
        };
        s[k] += v * v;
        c[k] += 1;
    }
    std::array::from_fn(|k| if c[k] == 0 { 0.0 } else { (s[k] / c[k] as f64).sqrt() })
}

#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub iterations: usize,
    pub norms: [f64; 3],
    pub ndof: usize,
    pub cut: CutState,
    pub record: CouplingRecord,
}

/// Advances `state` by one step of size `dt`.
pub fn solve_step(problem: &Problem, state: &mut State, dt: f64) -> Result<StepReport> {
    let scheme = TimeScheme::new(dt, problem.theta);
    solve_with_scheme(problem, state, scheme, state.t + dt)
}

/// Solves the stationary problem at time `t` starting from `state`.
pub fn solve_steady(problem: &Problem, state: &mut State, t: f64) -> Result<StepReport> {
    solve_with_scheme(problem, state, TimeScheme::steady(), t)
}

fn solve_with_scheme(problem: &Problem, state: &mut State, scheme: TimeScheme, t_new: f64) -> Result<StepReport> {
    let np = &problem.newton;
    let h = problem.h();
    let mut u = state.u.clone();
    let mut fluid = state.fluid.clone();
    problem.set_solid_dirichlet(&mut u, t_new);
    let nf = fluid.v.len();
    let mut retained: Option<Vec<bool>> = None;
    let mut cut: Option<CutState> = None;
    let mut frozen = false;
    let mut omega: f64 = 1.0;
    let mut prev_norm = f64::INFINITY;
    let mut report = StepReport::default();
    for it in 0..=np.max_iter {
        if it >= np.growth_after && retained.is_none() {
            retained = Some(vec![false; nf]);
        }
        if !frozen || cut.is_none() {
            let cs = problem.build_cut(&u, retained.as_deref())?;
            cut = Some(cs);
        }
        let cs = cut.as_ref().unwrap();
        let dm = problem.dof_map(cs);
        if let Some(ret) = retained.as_mut() {
            for (r, a) in ret.iter_mut().zip(&cs.active_nodes) {
                *r |= *a;
            }
        }
        for n in 0..nf {
            if dm.fluid_base[n].is_some() && !fluid.valid[n] {
                fluid.v[n] = Vec2::zeros();
                fluid.p[n] = 0.0;
                fluid.valid[n] = true;
            }
        }
        problem.set_fluid_dirichlet(&dm, &mut fluid, t_new);
        let sc = StepContext {
            problem,
            cut: cs,
            dofs: &dm,
            scheme,
            t: t_new,
            solid_old: &state.solid_old,
            fluid_old: &state.fluid_old,
        };
        let mut rec = CouplingRecord::default();
        let mut asm = assemble_raw(&sc, &u, &fluid, true, Some(&mut rec))?;
        eliminate_dirichlet(&mut asm, &dm);
        let norms = field_norms(&asm.r, &dm);
        debug!("t={t_new:.6} it={it} norms={norms:?} omega={omega:.3}");
        if norms.iter().all(|&v| v < np.tol) {
            report.iterations = it;
            report.norms = norms;
            report.ndof = dm.n;
            report.record = rec;
            report.cut = cut.take().unwrap();
            commit(problem, state, u, fluid, scheme, t_new, &report.cut);
            return Ok(report);
        }
        if it == np.max_iter {
            return Err(Error::Convergence {
                time: t_new,
                iterations: it,
                msg: format!("residual norms {norms:?} above tolerance {:.1e}", np.tol),
            });
        }
        if !norms.iter().all(|v| v.is_finite()) {
            return Err(Error::Convergence {
                time: t_new,
                iterations: it,
                msg: "non-finite residual".into(),
            });
        }
        let total = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
        if it > 0 {
            if total > 1.1 * prev_norm {
                omega = (omega * np.omega_shrink).max(np.omega_min);
            } else if total < prev_norm {
                omega = (omega * np.omega_grow).min(1.0);
            }
        }
        prev_norm = total;
        let rhs: Vec<f64> = asm.r.iter().map(|v| -v).collect();
        let dx = sparse_solve(dm.n, &asm.trip, &rhs)?;
        let mut x = gather(&dm, &u, &fluid);
        for i in 0..dm.n {
            x[i] += omega * dx[i];
        }
        scatter(&dm, &x, &mut u, &mut fluid);
        let du = dx[..u.len()].iter().fold(0.0f64, |m, v| m.max(v.abs())) * omega;
        if du <= np.eps_geom * h {
            frozen = true;
        }
    }
    warn!("Newton loop exited without verdict");
    Err(Error::Convergence {
        time: t_new,
        iterations: np.max_iter,
        msg: "no convergence".into(),
    })
}

/// Accepts the converged iterate and rolls the history forward.
fn commit(problem: &Problem, state: &mut State, u: Vec<f64>, fluid: FluidField, scheme: TimeScheme, t_new: f64, cut: &CutState) {
    if scheme.steady {
        state.u = u;
        state.fluid = fluid;
        state.t = t_new;
        return;
    }
    let (v, a) = state.solid_old.rates(&u, &scheme);
    state.solid_old = SolidHistory { u: u.clone(), v, a };
    let mut fluid = fluid;
    let nf = fluid.v.len();
    let mut hist = FluidHistory::zeros(nf);
    for n in 0..nf {
        let active = problem.grid.is_some() && cut.active_nodes[n];
        fluid.valid[n] = active;
        if !active {
            continue;
        }
        let (vo, ao) = (state.fluid_old.v[n], state.fluid_old.a[n]);
        hist.v[n] = fluid.v[n];
        hist.a[n] = Vec2::new(
            scheme.rate(fluid.v[n].x, vo.x, ao.x),
            scheme.rate(fluid.v[n].y, vo.y, ao.y),
        );
    }
    state.fluid_old = hist;
    state.u = u;
    state.fluid = fluid;
    state.t = t_new;
    state.step += 1;
}

/// Convenience for tests: residual and Jacobian at a fixed iterate with
/// Dirichlet rows eliminated.
pub fn residual_and_jacobian(sc: &StepContext, u: &[f64], fluid: &FluidField) -> Result<Assembler> {
    let mut asm = assemble_raw(sc, u, fluid, true, None)?;
    eliminate_dirichlet(&mut asm, sc.dofs);
    Ok(asm)
}

/// Grid helper used by scenario builders: the grid node nearest to `x`.
pub fn nearest_grid_node(grid: &FluidGrid, x: &Vec2) -> usize {
    let q = x - grid.origin;
    let i = ((q.x / grid.hx).round().max(0.0) as usize).min(grid.nx);
    let j = ((q.y / grid.hy).round().max(0.0) as usize).min(grid.ny);
    grid.node_id(i, j)
}

/// Solid node nearest to a reference point.
pub fn nearest_solid_node(mesh: &SolidMesh, x: &Vec2) -> usize {
    (0..mesh.nodes.len())
        .min_by(|&a, &b| (mesh.nodes[a] - x).norm().total_cmp(&(mesh.nodes[b] - x).norm()))
        .unwrap_or(0)
}

const CHECKPOINT_MAGIC: &str = "fsci-checkpoint 1";

impl State {
    /// Versioned ASCII dump of the complete state. Floats are written in
    /// shortest round-trip form, so reading restores the state exactly.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(s, "time {:e} {}", self.t, self.step);
        let mut block = |name: &str, v: &[f64]| {
            let _ = writeln!(s, "{name} {}", v.len());
            for x in v {
                let _ = writeln!(s, "{x:e}");
            }
        };
        block("u", &self.u);
        block("solid_u_old", &self.solid_old.u);
        block("solid_v_old", &self.solid_old.v);
        block("solid_a_old", &self.solid_old.a);
        let flat = |f: &dyn Fn(usize) -> [f64; 2], n: usize| (0..n).flat_map(f).collect::<Vec<f64>>();
        let nf = self.fluid.v.len();
        block("fluid_v", &flat(&|i| [self.fluid.v[i].x, self.fluid.v[i].y], nf));
        block("fluid_p", &self.fluid.p);
        let valid: Vec<f64> = self.fluid.valid.iter().map(|&b| b as u8 as f64).collect();
        block("fluid_valid", &valid);
        block("fluid_v_old", &flat(&|i| [self.fluid_old.v[i].x, self.fluid_old.v[i].y], nf));
        block("fluid_a_old", &flat(&|i| [self.fluid_old.a[i].x, self.fluid_old.a[i].y], nf));
        s
    }

    pub fn from_checkpoint(text: &str, problem: &Problem) -> Result<State> {
        let bad = |m: String| Error::Config(format!("checkpoint: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CHECKPOINT_MAGIC) {
            return Err(bad("unsupported or missing header".into()));
        }
        let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if head.len() != 3 || head[0] != "time" {
            return Err(bad("missing time line".into()));
        }
        let t: f64 = head[1].parse().map_err(|_| bad("bad time".into()))?;
        let step: usize = head[2].parse().map_err(|_| bad("bad step".into()))?;
        let mut read = |name: &str, len: usize| -> Result<Vec<f64>> {
            let h: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
            if h.len() != 2 || h[0] != name || h[1].parse::<usize>().ok() != Some(len) {
                return Err(bad(format!("expected block '{name}' of length {len}")));
            }
            (0..len)
                .map(|_| {
                    lines
                        .next()
                        .and_then(|l| l.trim().parse::<f64>().ok())
                        .ok_or_else(|| bad(format!("truncated block '{name}'")))
                })
                .collect()
        };
        let ns = 2 * problem.mesh.nodes.len();
        let nf = problem.grid.as_ref().map_or(0, |g| g.n_nodes());
        let u = read("u", ns)?;
        let solid_old = SolidHistory {
            u: read("solid_u_old", ns)?,
            v: read("solid_v_old", ns)?,
            a: read("solid_a_old", ns)?,
        };
        let pairs = |v: Vec<f64>| v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect::<Vec<_>>();
        let fv = pairs(read("fluid_v", 2 * nf)?);
        let fp = read("fluid_p", nf)?;
        let valid = read("fluid_valid", nf)?.into_iter().map(|x| x != 0.0).collect();
        let ov = pairs(read("fluid_v_old", 2 * nf)?);
        let oa = pairs(read("fluid_a_old", 2 * nf)?);
        Ok(State {
            t,
            step,
            u,
            fluid: FluidField { v: fv, p: fp, valid },
            solid_old,
            fluid_old: FluidHistory { v: ov, a: oa },
        })
    }
}
