use fsci::coupling::{assemble_coupling, CouplingContext, CouplingRecord, InterfaceParams};
use fsci::cutcell::{build_cut_state, CutParams, CutState};
use fsci::fluid::{FluidField, FluidHistory, FluidParams};
use fsci::linalg::{Assembler, DofMap};
use fsci::mesh::{FluidGrid, Side, SolidMesh};
use fsci::postproc::{cut_vtk, flow_rate_sides, grid_vtk, reconstruct_traction, samples_vtk, solid_vtk, write_vtk};
use fsci::solid::{NeoHooke, SolidBody, SolidHistory};
use fsci::timefn::TimeScheme;
use fsci::Vec2;

const CENTRE: Vec2 = Vec2::new(0.51, 0.47);
const PRESSURE: f64 = 2.5;

struct Immersed {
    grid: FluidGrid,
    mesh: SolidMesh,
    cut: CutState,
    fluid: FluidField,
    rec: CouplingRecord,
}

/// Elastic disk at rest in a fluid under uniform pressure.
fn immersed_disk() -> Immersed {
    let grid = FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 12, 12).unwrap();
    let mut mesh = SolidMesh::disk("d", CENTRE, 0.27, 6).unwrap();
    for s in ["bottom", "right", "top", "left"] {
        mesh.mark_coupling(&format!("d.{s}")).unwrap();
    }
    let u = vec![0.0; 2 * mesh.nodes.len()];
    let cut = build_cut_state(Some(&grid), &mesh, &u, &CutParams::default(), None).unwrap();
    let dm = DofMap::new(mesh.nodes.len(), &cut.active_nodes);
    let mut fluid = FluidField::zeros(grid.n_nodes());
    for n in 0..grid.n_nodes() {
        fluid.p[n] = PRESSURE;
        fluid.valid[n] = true;
    }
    let bodies = vec![SolidBody {
        material: NeoHooke::new(100.0, 0.3, 1.0).unwrap(),
        rigid: false,
    }];
    let fp = FluidParams::new(1.0, 1e-3);
    let params = InterfaceParams::default();
    let scheme = TimeScheme::new(0.1, 1.0);
    let sold = SolidHistory::zeros(mesh.nodes.len());
    let fold = FluidHistory::zeros(grid.n_nodes());
    let ctx = CouplingContext {
        grid: Some(&grid),
        cut: &cut,
        dofs: &dm,
        mesh: &mesh,
        bodies: &bodies,
        fluid: Some(&fp),
        params: &params,
        scheme: &scheme,
        fluid_old: Some(&fold),
        solid_old: &sold,
        h: grid.h(),
    };
    let mut asm = Assembler::new(dm.n, false);
    let mut rec = CouplingRecord::default();
    assemble_coupling(&ctx, &u, Some(&fluid), &mut asm, Some(&mut rec)).unwrap();
    Immersed { grid, mesh, cut, fluid, rec }
}

#[test]
fn parabolic_inflow_rate_is_nodal_trapezoid() {
    let n = 10;
    let grid = FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), 2 * n, n).unwrap();
    let mesh = SolidMesh::new(vec![], vec![], vec![], Default::default(), vec![]).unwrap();
    let cut = build_cut_state(Some(&grid), &mesh, &[], &CutParams::default(), None).unwrap();
    let prof = |y: f64| 4.0 * y * (1.0 - y);
    let mut st = FluidField::zeros(grid.n_nodes());
    for k in 0..grid.n_nodes() {
        st.v[k] = Vec2::new(prof(grid.node_pos(k).y), 0.0);
        st.valid[k] = true;
    }
    let h = 1.0 / n as f64;
    let trapezoid: f64 = (0..n).map(|j| 0.5 * h * (prof(j as f64 * h) + prof((j + 1) as f64 * h))).sum();
    let q = flow_rate_sides(&grid, &cut, &st, &[Side::Left]);
    assert!((q - trapezoid).abs() < 1e-14, "{q} {trapezoid}");
    let out = flow_rate_sides(&grid, &cut, &st, &[Side::Right]);
    assert!((out - q).abs() < 1e-14);
}

/// Constant pressure: each node carries the length-weighted mean of the
/// adjacent edge normals.
#[test]
fn uniform_pressure_traction() {
    let im = immersed_disk();
    let zeros = vec![0.0; 2 * im.mesh.nodes.len()];
    let mut acc = vec![(Vec2::zeros(), 0.0); im.mesh.nodes.len()];
    for e in im.mesh.boundary.iter().filter(|e| e.coupling) {
        let [a, b] = e.nodes;
        let d = im.mesh.nodes[b] - im.mesh.nodes[a];
        let ln = Vec2::new(d.y, -d.x);
        for n in [a, b] {
            acc[n].0 += ln;
            acc[n].1 += d.norm();
        }
    }
    let tr = reconstruct_traction(&im.mesh, &zeros, &im.rec);
    assert_eq!(tr.len(), acc.iter().filter(|a| a.1 > 0.0).count());
    for t in &tr {
        let (ln, l) = acc[t.node];
        let expected = -PRESSURE * ln / l;
        assert!((t.fsi - expected).norm() < 1e-10 * PRESSURE, "{:?} {:?}", t.fsi, expected);
        assert!((t.fsi.norm() - PRESSURE).abs() < 0.02 * PRESSURE);
        assert!(t.fsi.dot(&(t.position - CENTRE)) < 0.0);
        assert_eq!(t.contact, Vec2::zeros());
        assert_eq!(t.total(), t.fsi + t.contact);
    }
}

#[test]
fn vtk_files_load_in_a_reader() {
    let im = immersed_disk();
    let dir = tempfile::tempdir().unwrap();
    let zeros = vec![0.0; 2 * im.mesh.nodes.len()];
    let files = [
        ("grid", grid_vtk(&im.grid, &im.cut, &im.fluid)),
        ("solid", solid_vtk(&im.mesh, &zeros, &zeros)),
        ("cut", cut_vtk(&im.cut)),
        ("samples", samples_vtk(&im.cut, &im.rec)),
    ];
    for (name, content) in &files {
        write_vtk(dir.path(), "t", name, 3, content).unwrap();
        let path = dir.path().join(format!("t_{name}_000003.vtk"));
        let vtk = vtkio::Vtk::import(&path).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert!(!vtk.title.is_empty());
    }
}
