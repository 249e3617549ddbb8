//! Incompressible Navier-Stokes on the cut background grid with equal-order
//! bilinear velocity and pressure, face-jump stabilization and ghost
//! penalties.

use std::fmt;
use std::sync::Arc;

use crate::cutcell::{CutState, ElementClass};
use crate::geom::Vec2;
use crate::linalg::{Assembler, DofMap};
use crate::mesh::{FluidGrid, Side};
use crate::quadrature::gauss_legendre;
use crate::timefn::{TimeFunction, TimeScheme};

pub type ScalarField = Arc<dyn Fn(Vec2, f64) -> f64 + Send + Sync>;

/// Prescribed scalar: a function of time or of space and time.
#[derive(Clone)]
pub enum BcValue {
    Time(TimeFunction),
    Field(ScalarField),
}

impl BcValue {
    pub fn eval(&self, x: &Vec2, t: f64) -> f64 {
        match self {
            BcValue::Time(f) => f.eval(t),
            BcValue::Field(f) => f(*x, t),
        }
    }
}

impl fmt::Debug for BcValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcValue::Time(tf) => write!(f, "Time({tf:?})"),
            BcValue::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl From<f64> for BcValue {
    fn from(v: f64) -> Self {
        BcValue::Time(TimeFunction::Value(v))
    }
}

/// Boundary condition on one side of the grid, per velocity component.
/// A component with neither entry is traction free.
#[derive(Clone, Debug, Default)]
pub struct SideBc {
    pub dirichlet: [Option<BcValue>; 2],
    pub traction: [Option<BcValue>; 2],
}

#[derive(Clone, Debug)]
pub struct FluidParams {
    pub density: f64,
    pub viscosity: f64,
    pub body_force: Option<[BcValue; 2]>,
    pub bc: [SideBc; 4],
}

impl FluidParams {
    pub fn new(density: f64, viscosity: f64) -> Self {
        FluidParams {
            density,
            viscosity,
            body_force: None,
            bc: Default::default(),
        }
    }

    pub fn side(&self, s: Side) -> &SideBc {
        &self.bc[s as usize]
    }

    pub fn side_mut(&mut self, s: Side) -> &mut SideBc {
        &mut self.bc[s as usize]
    }
}

#[derive(Clone, Debug)]
pub struct StabParams {
    pub gamma_p: f64,
    pub gamma_v: f64,
    pub gamma_ghost_v: f64,
    pub gamma_ghost_p: f64,
    pub cip: bool,
    pub ghost: bool,
}

impl Default for StabParams {
    fn default() -> Self {
        StabParams {
            gamma_p: 0.05,
            gamma_v: 0.05,
            gamma_ghost_v: 0.05,
            gamma_ghost_p: 0.05,
            cip: true,
            ghost: true,
        }
    }
}

/// Nodal fluid values on the whole grid. Nodes that never carried unknowns
/// have `valid == false`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FluidField {
    pub v: Vec<Vec2>,
    pub p: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FluidField {
    pub fn zeros(n: usize) -> Self {
        FluidField {
            v: vec![Vec2::zeros(); n],
            p: vec![0.0; n],
            valid: vec![false; n],
        }
    }
}

/// Old time level: velocities and their time derivatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FluidHistory {
    pub v: Vec<Vec2>,
    pub a: Vec<Vec2>,
}

impl FluidHistory {
    pub fn zeros(n: usize) -> Self {
        FluidHistory {
            v: vec![Vec2::zeros(); n],
            a: vec![Vec2::zeros(); n],
        }
    }

    /// Largest old velocity magnitude on the nodes of element `e`.
    pub fn elem_speed(&self, grid: &FluidGrid, e: usize) -> f64 {
        grid.elem_nodes(e).iter().map(|&n| self.v[n].norm()).fold(0.0, f64::max)
    }
}

/// Viscous, convective and transient scale `mu + rho h |v| + rho h^2 / dt`.
pub fn penalty_scale(params: &FluidParams, h: f64, speed: f64, scheme: &TimeScheme) -> f64 {
    params.viscosity + params.density * h * speed + params.density * h * h * scheme.inv_dt()
}

/// Everything the fluid assembly reads.
pub struct FluidContext<'a> {
    pub grid: &'a FluidGrid,
    pub cut: &'a CutState,
    pub dofs: &'a DofMap,
    pub params: &'a FluidParams,
    pub stab: &'a StabParams,
    pub scheme: &'a TimeScheme,
    pub old: &'a FluidHistory,
    pub fluid_points: usize,
    pub t: f64,
}

impl<'a> FluidContext<'a> {
    fn base(&self, n: usize) -> usize {
        self.dofs.fluid_base[n].expect("node of a physical element must be active")
    }
}

/// Volume terms, face stabilization and Neumann loads of the fluid.
pub fn assemble_fluid(ctx: &FluidContext, state: &FluidField, asm: &mut Assembler) {
    let grid = ctx.grid;
    let (rho, mu) = (ctx.params.density, ctx.params.viscosity);
    let cf = ctx.scheme.rate_factor();
    for e in 0..grid.n_elements() {
        if ctx.cut.class[e] == ElementClass::Void {
            continue;
        }
        let nodes = grid.elem_nodes(e);
        let base: [usize; 4] = nodes.map(|n| ctx.base(n));
        let vn: [Vec2; 4] = nodes.map(|n| state.v[n]);
        let pn: [f64; 4] = nodes.map(|n| state.p[n]);
        let an: [Vec2; 4] = std::array::from_fn(|i| {
            let n = nodes[i];
            Vec2::new(
                ctx.scheme.rate(vn[i].x, ctx.old.v[n].x, ctx.old.a[n].x),
                ctx.scheme.rate(vn[i].y, ctx.old.v[n].y, ctx.old.a[n].y),
            )
        });
        let mut re = [0.0; 12];
        let mut ke = [[0.0; 12]; 12];
        for (x, w) in ctx.cut.element_qp(grid, e, ctx.fluid_points) {
            let (nn, g) = grid.shape(e, &x);
            let mut v = Vec2::zeros();
            let mut dvdt = Vec2::zeros();
            let mut p = 0.0;
            let mut gv = nalgebra::Matrix2::zeros();
            for i in 0..4 {
                v += vn[i] * nn[i];
                dvdt += an[i] * nn[i];
                p += pn[i] * nn[i];
                gv += vn[i] * g[i].transpose();
            }
            let f = ctx
                .params
                .body_force
                .as_ref()
                .map_or(Vec2::zeros(), |b| Vec2::new(b[0].eval(&x, ctx.t), b[1].eval(&x, ctx.t)));
            let conv = gv * v;
            let eps2 = gv + gv.transpose();
            let div = gv.trace();
            for i in 0..4 {
                for k in 0..2 {
                    let visc = mu * (eps2[(k, 0)] * g[i].x + eps2[(k, 1)] * g[i].y);
                    re[3 * i + k] +=
                        w * (nn[i] * rho * (dvdt[k] + conv[k]) - p * g[i][k] + visc - nn[i] * rho * f[k]);
                }
                re[3 * i + 2] += w * nn[i] * div;
            }
            if !asm.with_matrix {
                continue;
            }
            for i in 0..4 {
                for j in 0..4 {
                    let m = rho * nn[i] * nn[j] * cf;
                    let adv = rho * nn[i] * g[j].dot(&v);
                    let lap = mu * g[i].dot(&g[j]);
                    for k in 0..2 {
                        for l in 0..2 {
                            let mut val = rho * nn[i] * nn[j] * gv[(k, l)] + mu * g[i][l] * g[j][k];
                            if k == l {
                                val += m + adv + lap;
                            }
                            ke[3 * i + k][3 * j + l] += w * val;
                        }
                        ke[3 * i + k][3 * j + 2] -= w * g[i][k] * nn[j];
                        ke[3 * i + 2][3 * j + k] += w * nn[i] * g[j][k];
                    }
                }
            }
        }
        for a in 0..12 {
            let ga = base[a / 3] + a % 3;
            asm.add_r(ga, re[a]);
            for b in 0..12 {
                asm.add_k(ga, base[b / 3] + b % 3, ke[a][b]);
            }
        }
    }
    assemble_faces(ctx, state, asm);
    assemble_neumann(ctx, asm);
}

fn assemble_faces(ctx: &FluidContext, state: &FluidField, asm: &mut Assembler) {
    let grid = ctx.grid;
    let (rho, mu) = (ctx.params.density, ctx.params.viscosity);
    let h = grid.h();
    let faces = grid.faces();
    let g2 = gauss_legendre(2);
    let mut ghost = vec![false; faces.len()];
    for &k in &ctx.cut.ghost_faces {
        ghost[k] = true;
    }
    for &k in &ctx.cut.cip_faces {
        let f = &faces[k];
        let speed = ctx.old.elem_speed(grid, f.left).max(ctx.old.elem_speed(grid, f.right));
        let phi_p = mu + rho * speed * h + rho * h * h * ctx.scheme.inv_dt();
        let mut cv = 0.0;
        let mut cp = 0.0;
        if ctx.stab.cip {
            cv += ctx.stab.gamma_v * rho * speed * h * h;
            cp += ctx.stab.gamma_p * h.powi(3) / phi_p;
        }
        if ctx.stab.ghost && ghost[k] {
            cv += ctx.stab.gamma_ghost_v * (mu + rho * h * h * ctx.scheme.inv_dt()) * h;
            cp += ctx.stab.gamma_ghost_p * h.powi(3) / phi_p;
        }
        if cv == 0.0 && cp == 0.0 {
            continue;
        }
        let nodes: Vec<usize> = grid.elem_nodes(f.left).into_iter().chain(grid.elem_nodes(f.right)).collect();
        let base: Vec<usize> = nodes.iter().map(|&n| ctx.base(n)).collect();
        let len = (f.b - f.a).norm();
        for &(q, wq) in &g2 {
            let x = f.a + (f.b - f.a) * (0.5 * (q + 1.0));
            let w = 0.5 * wq * len;
            let (_, gl) = grid.shape(f.left, &x);
            let (_, gr) = grid.shape(f.right, &x);
            // Jump of the normal derivative of each of the eight shape functions.
            let jn: [f64; 8] = std::array::from_fn(|a| {
                if a < 4 {
                    -gl[a].dot(&f.normal)
                } else {
                    gr[a - 4].dot(&f.normal)
                }
            });
            let mut jv = Vec2::zeros();
            let mut jp = 0.0;
            for a in 0..8 {
                jv += state.v[nodes[a]] * jn[a];
                jp += state.p[nodes[a]] * jn[a];
            }
            for a in 0..8 {
                for c in 0..2 {
                    asm.add_r(base[a] + c, w * cv * jv[c] * jn[a]);
                }
                asm.add_r(base[a] + 2, w * cp * jp * jn[a]);
                for b in 0..8 {
                    let m = w * jn[a] * jn[b];
                    for c in 0..2 {
                        asm.add_k(base[a] + c, base[b] + c, cv * m);
                    }
                    asm.add_k(base[a] + 2, base[b] + 2, cp * m);
                }
            }
        }
    }
}

fn assemble_neumann(ctx: &FluidContext, asm: &mut Assembler) {
    let grid = ctx.grid;
    let g2 = gauss_legendre(2);
    for bp in &ctx.cut.boundary_pieces {
        let bc = ctx.params.side(bp.side);
        if bc.traction.iter().all(|t| t.is_none()) {
            continue;
        }
        let nodes = grid.elem_nodes(bp.elem);
        let len = (bp.b - bp.a).norm();
        for &(q, wq) in &g2 {
            let x = bp.a + (bp.b - bp.a) * (0.5 * (q + 1.0));
            let w = 0.5 * wq * len;
            let (nn, _) = grid.shape(bp.elem, &x);
            for c in 0..2 {
                if bc.dirichlet[c].is_some() {
                    continue;
                }
                if let Some(tr) = &bc.traction[c] {
                    let val = tr.eval(&x, ctx.t);
                    for i in 0..4 {
                        asm.add_r(ctx.base(nodes[i]) + c, -w * nn[i] * val);
                    }
                }
            }
        }
    }
}

/// Velocity, pressure and velocity gradient of the grid field at `x` inside
/// element `e`.
pub fn eval_at(grid: &FluidGrid, state: &FluidField, e: usize, x: &Vec2) -> (Vec2, f64, nalgebra::Matrix2<f64>) {
    let (nn, g) = grid.shape(e, x);
    let mut v = Vec2::zeros();
    let mut p = 0.0;
    let mut gv = nalgebra::Matrix2::zeros();
    for (i, n) in grid.elem_nodes(e).into_iter().enumerate() {
        v += state.v[n] * nn[i];
        p += state.p[n] * nn[i];
        gv += state.v[n] * g[i].transpose();
    }
    (v, p, gv)
}
