//! Flow-rate diagnostics, interface traction reconstruction and file output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::coupling::{Case, CouplingRecord};
use crate::cutcell::{CutState, ElementClass, SampleSide};
use crate::error::{Error, Result};
use crate::fluid::{eval_at, FluidField};
use crate::geom::Vec2;
use crate::mesh::{q4_shape, FluidGrid, Side, SolidMesh};
use crate::quadrature::gauss_legendre;

/// `|int v.n|` over the uncovered parts of the given grid sides, with the
/// outward normal of the grid.
pub fn flow_rate_sides(grid: &FluidGrid, cut: &CutState, fluid: &FluidField, sides: &[Side]) -> f64 {
    let g = gauss_legendre(2);
    let mut q = 0.0;
    for bp in cut.boundary_pieces.iter().filter(|b| sides.contains(&b.side)) {
        let n = bp.side.outward_normal();
        let len = (bp.b - bp.a).norm();
        for &(s, w) in &g {
            let x = bp.a + (bp.b - bp.a) * (0.5 * (s + 1.0));
            let (v, _, _) = eval_at(grid, fluid, bp.elem, &x);
            q += 0.5 * w * len * v.dot(&n);
        }
    }
    q.abs()
}

/// Flow rate through the whole outer boundary of the fluid domain.
pub fn flow_rate_boundary(grid: &FluidGrid, cut: &CutState, fluid: &FluidField) -> f64 {
    flow_rate_sides(grid, cut, fluid, &Side::ALL)
}

/// `|int v.n|` of the fluid velocity over the wetted interface.
pub fn flow_rate_interface_fluid(grid: &FluidGrid, cut: &CutState, fluid: &FluidField) -> f64 {
    cut.samples
        .iter()
        .filter(|s| s.side == SampleSide::Fsi)
        .map(|s| {
            let (v, _, _) = eval_at(grid, fluid, s.fluid_elem.unwrap(), &s.x);
            s.weight * v.dot(&s.normal)
        })
        .sum::<f64>()
        .abs()
}

/// `|int du/dt . n|` of the solid velocity over the wetted interface.
pub fn flow_rate_interface_solid(mesh: &SolidMesh, cut: &CutState, velocity: &[f64]) -> f64 {
    cut.samples
        .iter()
        .filter(|s| s.side == SampleSide::Fsi)
        .map(|s| s.weight * crate::solid::velocity_at(mesh, s.element, &s.xi, velocity).dot(&s.normal))
        .sum::<f64>()
        .abs()
}

/// Mass balance errors `(|PhiS - Phi|, |PhiS - PhiF|)`.
pub fn flow_rate_errors(phi: f64, phi_f: f64, phi_s: f64) -> (f64, f64) {
    ((phi_s - phi).abs(), (phi_s - phi_f).abs())
}

/// Interface traction at one solid node, split by origin.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalTraction {
    pub node: usize,
    pub position: Vec2,
    pub fsi: Vec2,
    pub contact: Vec2,
}

impl NodalTraction {
    pub fn total(&self) -> Vec2 {
        self.fsi + self.contact
    }
}

/// Divides the recorded nodal interface forces by the tributary length of
/// each coupling node (half the adjacent current edge lengths).
pub fn reconstruct_traction(mesh: &SolidMesh, u: &[f64], rec: &CouplingRecord) -> Vec<NodalTraction> {
    if rec.fsi_force.is_empty() {
        return Vec::new();
    }
    let mut trib = vec![0.0; mesh.nodes.len()];
    for e in mesh.boundary.iter().filter(|e| e.coupling) {
        let [a, b] = e.nodes;
        let l = (mesh.position(b, u) - mesh.position(a, u)).norm();
        trib[a] += 0.5 * l;
        trib[b] += 0.5 * l;
    }
    (0..mesh.nodes.len())
        .filter(|&n| trib[n] > 0.0)
        .map(|n| {
            let f = |v: &[f64]| Vec2::new(v[2 * n], v[2 * n + 1]) / trib[n];
            NodalTraction {
                node: n,
                position: mesh.position(n, u),
                fsi: f(&rec.fsi_force),
                contact: f(&rec.contact_force),
            }
        })
        .collect()
}

/// One row of the time series output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub phi: f64,
    pub phi_f: f64,
    pub phi_s: f64,
    pub err1: f64,
    pub err2: f64,
    pub probe: Vec2,
    pub newton_iters: usize,
    pub ndof: usize,
}

pub const CSV_HEADER: &str = "t,Phi,PhiF,PhiS,err1,err2,probe_ux,probe_uy,newton_iters,ndof";

impl TimeSeriesRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
            self.t,
            self.phi,
            self.phi_f,
            self.phi_s,
            self.err1,
            self.err2,
            self.probe.x,
            self.probe.y,
            self.newton_iters,
            self.ndof
        )
    }
}

pub fn traction_csv(tr: &[NodalTraction]) -> String {
    let mut s = String::from("node,x,y,tx,ty,fsi_tx,fsi_ty,contact_tx,contact_ty\n");
    for t in tr {
        let tot = t.total();
        let _ = writeln!(
            s,
            "{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            t.node, t.position.x, t.position.y, tot.x, tot.y, t.fsi.x, t.fsi.y, t.contact.x, t.contact.y
        );
    }
    s
}

fn case_id(c: Option<Case>) -> i32 {
    c.map_or(0, |c| c as i32)
}

/// Per-sample interface diagnostics.
pub fn interface_csv(cut: &CutState, rec: &CouplingRecord) -> String {
    let mut s = String::from("x,y,side,gap,indicator,case,kappa,sigma_fluid,sigma_contact\n");
    for r in &rec.samples {
        let smp = &cut.samples[r.sample];
        let side = match smp.side {
            SampleSide::Fsi => "fsi",
            SampleSide::Contact => "contact",
            SampleSide::Dry => "dry",
        };
        let _ = writeln!(
            s,
            "{:.10e},{:.10e},{side},{:.10e},{:.10e},{},{:.10e},{:.10e},{:.10e}",
            smp.x.x,
            smp.x.y,
            r.gap,
            r.indicator,
            case_id(r.case),
            r.slip_length,
            r.sigma_fluid,
            r.sigma_contact
        );
    }
    s
}

fn header(s: &mut String, title: &str, kind: &str) {
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\n");
    let _ = writeln!(s, "DATASET {kind}");
}

fn points(s: &mut String, pts: &[Vec2]) {
    let _ = writeln!(s, "POINTS {} double", pts.len());
    for p in pts {
        let _ = writeln!(s, "{:e} {:e} 0", p.x, p.y);
    }
}

fn vectors(s: &mut String, name: &str, v: impl Iterator<Item = Vec2>) {
    let _ = writeln!(s, "VECTORS {name} double");
    for x in v {
        let _ = writeln!(s, "{:e} {:e} 0", x.x, x.y);
    }
}

fn scalars<T: std::fmt::Display>(s: &mut String, name: &str, ty: &str, v: impl Iterator<Item = T>) {
    let _ = writeln!(s, "SCALARS {name} {ty} 1");
    s.push_str("LOOKUP_TABLE default\n");
    for x in v {
        let _ = writeln!(s, "{x}");
    }
}

fn quads(s: &mut String, cells: &[[usize; 4]]) {
    let _ = writeln!(s, "CELLS {} {}", cells.len(), 5 * cells.len());
    for c in cells {
        let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for _ in cells {
        s.push_str("9\n");
    }
}

/// Fluid grid with nodal velocity and pressure and the element class.
pub fn grid_vtk(grid: &FluidGrid, cut: &CutState, fluid: &FluidField) -> String {
    let mut s = String::new();
    header(&mut s, "fluid grid", "UNSTRUCTURED_GRID");
    let pts: Vec<Vec2> = (0..grid.n_nodes()).map(|n| grid.node_pos(n)).collect();
    points(&mut s, &pts);
    let cells: Vec<[usize; 4]> = (0..grid.n_elements()).map(|e| grid.elem_nodes(e)).collect();
    quads(&mut s, &cells);
    let _ = writeln!(s, "CELL_DATA {}", cells.len());
    scalars(
        &mut s,
        "class",
        "int",
        (0..grid.n_elements()).map(|e| match cut.class.get(e) {
            Some(ElementClass::Fluid) => 0,
            Some(ElementClass::Cut) => 1,
            _ => 2,
        }),
    );
    let _ = writeln!(s, "POINT_DATA {}", pts.len());
    let active = |n: usize| cut.active_nodes.get(n).copied().unwrap_or(false);
    vectors(&mut s, "velocity", (0..pts.len()).map(|n| if active(n) { fluid.v[n] } else { Vec2::zeros() }));
    scalars(&mut s, "pressure", "double", (0..pts.len()).map(|n| if active(n) { fluid.p[n] } else { 0.0 }));
    scalars(&mut s, "active", "int", (0..pts.len()).map(|n| active(n) as i32));
    s
}

/// Solid mesh in the reference configuration with displacement and
/// velocity point data.
pub fn solid_vtk(mesh: &SolidMesh, u: &[f64], velocity: &[f64]) -> String {
    let mut s = String::new();
    header(&mut s, "solid", "UNSTRUCTURED_GRID");
    points(&mut s, &mesh.nodes);
    quads(&mut s, &mesh.elements);
    let _ = writeln!(s, "CELL_DATA {}", mesh.elements.len());
    scalars(&mut s, "body", "int", mesh.element_body.iter());
    let _ = writeln!(s, "POINT_DATA {}", mesh.nodes.len());
    let vec_at = |v: &[f64], n: usize| Vec2::new(v[2 * n], v[2 * n + 1]);
    vectors(&mut s, "displacement", (0..mesh.nodes.len()).map(|n| vec_at(u, n)));
    vectors(&mut s, "velocity", (0..mesh.nodes.len()).map(|n| vec_at(velocity, n)));
    s
}

/// Physical parts of cut elements as polygons.
pub fn cut_vtk(cut: &CutState) -> String {
    let mut s = String::new();
    header(&mut s, "cut polygons", "POLYDATA");
    let pts: Vec<Vec2> = cut.pieces.iter().flat_map(|p| p.polygon.iter().copied()).collect();
    points(&mut s, &pts);
    let size: usize = cut.pieces.iter().map(|p| p.polygon.len() + 1).sum();
    let _ = writeln!(s, "POLYGONS {} {}", cut.pieces.len(), size);
    let mut k = 0;
    for p in &cut.pieces {
        let _ = write!(s, "{}", p.polygon.len());
        for _ in &p.polygon {
            let _ = write!(s, " {k}");
            k += 1;
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_DATA {}", cut.pieces.len());
    scalars(&mut s, "element", "int", cut.pieces.iter().map(|p| p.elem));
    s
}

/// Interface samples with gap, case indicator and active case.
pub fn samples_vtk(cut: &CutState, rec: &CouplingRecord) -> String {
    let mut s = String::new();
    header(&mut s, "interface samples", "POLYDATA");
    let pts: Vec<Vec2> = cut.samples.iter().map(|x| x.x).collect();
    points(&mut s, &pts);
    let _ = writeln!(s, "VERTICES {} {}", pts.len(), 2 * pts.len());
    for i in 0..pts.len() {
        let _ = writeln!(s, "1 {i}");
    }
    let _ = writeln!(s, "POINT_DATA {}", pts.len());
    let finite = |v: f64| if v.is_finite() { v } else { -1.0 };
    scalars(&mut s, "gap", "double", rec.samples.iter().map(|r| finite(r.gap)));
    scalars(&mut s, "indicator", "double", rec.samples.iter().map(|r| if r.indicator.is_finite() { r.indicator } else { 0.0 }));
    scalars(&mut s, "case", "int", rec.samples.iter().map(|r| case_id(r.case)));
    vectors(&mut s, "normal", cut.samples.iter().map(|x| x.normal));
    s
}

/// Writes `<dir>/<prefix>_<field>_<step:06>.vtk`.
pub fn write_vtk(dir: &Path, prefix: &str, field: &str, step: usize, content: &str) -> Result<()> {
    let path = dir.join(format!("{prefix}_{field}_{step:06}.vtk"));
    fs::write(&path, content).map_err(|e| Error::io(&path, e))
}

/// Solid displacement at a reference point, interpolated inside the
/// containing element.
pub fn probe_displacement(mesh: &SolidMesh, u: &[f64], x: &Vec2) -> Option<Vec2> {
    for (e, conn) in mesh.elements.iter().enumerate() {
        if let Some(xi) = reference_coords(mesh, e, x) {
            let (n, _) = q4_shape(&xi);
            let mut d = Vec2::zeros();
            for a in 0..4 {
                d += Vec2::new(u[2 * conn[a]], u[2 * conn[a] + 1]) * n[a];
            }
            return Some(d);
        }
    }
    None
}

/// Inverse isoparametric map by Newton iteration.
fn reference_coords(mesh: &SolidMesh, e: usize, x: &Vec2) -> Option<Vec2> {
    let conn = mesh.elements[e];
    let lo = conn.iter().map(|&n| mesh.nodes[n]).fold(Vec2::repeat(f64::INFINITY), |a, b| a.inf(&b));
    let hi = conn.iter().map(|&n| mesh.nodes[n]).fold(Vec2::repeat(f64::NEG_INFINITY), |a, b| a.sup(&b));
    let pad = 1e-9 * (hi - lo).norm();
    if x.x < lo.x - pad || x.y < lo.y - pad || x.x > hi.x + pad || x.y > hi.y + pad {
        return None;
    }
    let zero = vec![0.0; 2 * mesh.nodes.len()];
    let mut xi = Vec2::zeros();
    for _ in 0..30 {
        let r = mesh.map_point(e, &xi, &zero) - x;
        if r.norm() < 1e-13 * (1.0 + x.norm()) {
            break;
        }
        let j = mesh.jacobian(e, &xi, &zero);
        xi -= j.try_inverse()? * r;
    }
    (xi.x.abs() <= 1.0 + 1e-9 && xi.y.abs() <= 1.0 + 1e-9).then_some(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_arithmetic() {
        let (e1, e2) = flow_rate_errors(0.9, 1.05, 1.0);
        assert!((e1 - 0.1).abs() < 1e-15 && (e2 - 0.05).abs() < 1e-15);
        assert_eq!(flow_rate_errors(2.0, 2.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn csv_header_matches_row() {
        let r = TimeSeriesRecord::default();
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }
}
