use proptest::prelude::*;

use fsci::coupling::{assemble_coupling, slip_length, Case, CouplingContext, CouplingRecord, InterfaceParams};
use fsci::cutcell::{build_cut_state, CutParams, CutState, SampleSide};
use fsci::fluid::{FluidField, FluidHistory, FluidParams};
use fsci::linalg::{Assembler, DofMap};
use fsci::mesh::{FluidGrid, SolidMesh};
use fsci::solid::{NeoHooke, SolidBody, SolidHistory};
use fsci::timefn::TimeScheme;
use fsci::Vec2;

fn couple_all(mut m: SolidMesh) -> SolidMesh {
    for b in m.body_names.clone() {
        for s in ["bottom", "right", "top", "left"] {
            m.mark_coupling(&format!("{b}.{s}")).unwrap();
        }
    }
    m
}

fn elastic(n: usize) -> Vec<SolidBody> {
    vec![
        SolidBody {
            material: NeoHooke::new(100.0, 0.3, 1.0).unwrap(),
            rigid: false
        };
        n
    ]
}

struct Fixture {
    grid: Option<FluidGrid>,
    mesh: SolidMesh,
    bodies: Vec<SolidBody>,
    cut: CutState,
    dm: DofMap,
    u: Vec<f64>,
}

fn build(grid: Option<FluidGrid>, mesh: SolidMesh, u: Vec<f64>) -> Fixture {
    let bodies = elastic(mesh.body_names.len());
    let cut = build_cut_state(grid.as_ref(), &mesh, &u, &CutParams::default(), None).unwrap();
    let dm = DofMap::new(mesh.nodes.len(), &cut.active_nodes);
    Fixture { grid, mesh, bodies, cut, dm, u }
}

fn record(c: &Fixture, fluid: Option<(&FluidParams, &FluidField)>, h: f64) -> CouplingRecord {
    let params = InterfaceParams::default();
    let scheme = TimeScheme::new(0.1, 1.0);
    let sold = SolidHistory::zeros(c.mesh.nodes.len());
    let fold = c.grid.as_ref().map(|g| FluidHistory::zeros(g.n_nodes()));
    let ctx = CouplingContext {
        grid: c.grid.as_ref(),
        cut: &c.cut,
        dofs: &c.dm,
        mesh: &c.mesh,
        bodies: &c.bodies,
        fluid: fluid.map(|f| f.0),
        params: &params,
        scheme: &scheme,
        fluid_old: fold.as_ref(),
        solid_old: &sold,
        h,
    };
    let mut asm = Assembler::new(c.dm.n, false);
    let mut rec = CouplingRecord::default();
    assemble_coupling(&ctx, &c.u, fluid.map(|f| f.1), &mut asm, Some(&mut rec)).unwrap();
    rec
}

fn totals(f: &[f64]) -> Vec2 {
    let mut t = Vec2::zeros();
    for k in 0..f.len() / 2 {
        t += Vec2::new(f[2 * k], f[2 * k + 1]);
    }
    t
}

/// Two non-matching blocks pressed into each other along a flat seam.
fn pressed_seam(delta: f64) -> Fixture {
    let a = SolidMesh::rectangle("a", Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.5), 5, 3).unwrap();
    let b = SolidMesh::rectangle("b", Vec2::new(0.1, 0.5), Vec2::new(0.8, 1.0), 3, 2).unwrap();
    let mesh = couple_all(SolidMesh::merge(vec![a, b]).unwrap());
    let nodes_b = mesh.body_nodes(1);
    let mut u = vec![0.0; 2 * mesh.nodes.len()];
    for n in nodes_b {
        let p = mesh.nodes[n];
        u[2 * n + 1] = -delta * (1.0 + 0.3 * p.x);
    }
    build(None, mesh, u)
}

#[test]
fn contact_forces_balance_across_seam() {
    let c = pressed_seam(0.01);
    let rec = record(&c, None, 0.2);
    assert!(rec.samples.iter().any(|s| s.case == Some(Case::CoveredContact)));
    let total = totals(&rec.contact_force);
    let scale = rec.contact_force.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(scale > 0.0);
    assert!(total.norm() < 1e-12 * scale, "{total:?}");
    // The upper block is pushed up.
    let up: f64 = c.mesh.body_nodes(1).iter().map(|&n| rec.contact_force[2 * n + 1]).sum();
    assert!(up > 0.0);
}

#[test]
fn hydrostatic_pressure_has_zero_resultant() {
    let grid = FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 12, 12).unwrap();
    let mesh = couple_all(SolidMesh::disk("d", Vec2::new(0.51, 0.47), 0.27, 6).unwrap());
    let u = vec![0.0; 2 * mesh.nodes.len()];
    let c = build(Some(grid), mesh, u);
    let g = c.grid.as_ref().unwrap();
    let mut st = FluidField::zeros(g.n_nodes());
    for n in 0..g.n_nodes() {
        st.p[n] = 3.7;
        st.valid[n] = true;
    }
    let fp = FluidParams::new(1.0, 1e-3);
    let rec = record(&c, Some((&fp, &st)), g.h());
    assert!(rec.samples.iter().all(|s| s.case == Some(Case::WetFluid)));
    let total = totals(&rec.fsi_force);
    // Each node carries roughly pressure times its share of the perimeter.
    let nodal = rec.fsi_force.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(nodal > 0.1);
    assert!(total.norm() < 1e-12, "{total:?}");
}

/// Two blocks inside a fluid grid, one penetrating the other.
fn immersed_overlap() -> Fixture {
    let grid = FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 10, 10).unwrap();
    let a = SolidMesh::rectangle("a", Vec2::new(0.23, 0.21), Vec2::new(0.77, 0.513), 6, 3).unwrap();
    let b = SolidMesh::rectangle("b", Vec2::new(0.31, 0.5), Vec2::new(0.69, 0.81), 5, 4).unwrap();
    let mesh = couple_all(SolidMesh::merge(vec![a, b]).unwrap());
    let u = vec![0.0; 2 * mesh.nodes.len()];
    build(Some(grid), mesh, u)
}

#[test]
fn extension_source_is_nearest_wet_sample() {
    let c = immersed_overlap();
    let loops = &c.mesh.loops;
    let mut checked = 0;
    for s in c.cut.samples.iter().filter(|s| s.side == SampleSide::Contact) {
        let k = s.ext_source.expect("covered sample without source");
        let len = loops[s.loop_id].length;
        let dist = |a: f64| {
            let d = (a - s.arc).abs();
            d.min(len - d)
        };
        let best = c
            .cut
            .samples
            .iter()
            .filter(|w| w.side == SampleSide::Fsi && w.loop_id == s.loop_id)
            .map(|w| dist(w.arc))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(c.cut.samples[k].side, SampleSide::Fsi);
        assert_eq!(c.cut.samples[k].loop_id, s.loop_id);
        assert!((dist(c.cut.samples[k].arc) - best).abs() < 1e-14);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn selected_traction_is_the_minimum() {
    let c = immersed_overlap();
    let g = c.grid.as_ref().unwrap();
    let mut st = FluidField::zeros(g.n_nodes());
    for n in 0..g.n_nodes() {
        let x = g.node_pos(n);
        st.v[n] = Vec2::new(0.1 * x.y, -0.05 * x.x);
        st.p[n] = 2.0 * x.y - 1.0;
        st.valid[n] = true;
    }
    let fp = FluidParams::new(1.0, 1e-3);
    let rec = record(&c, Some((&fp, &st)), g.h());
    let mut both = 0;
    for r in &rec.samples {
        if !(r.sigma_contact.is_finite() && r.sigma_fluid.is_finite()) || r.case.is_none() {
            continue;
        }
        if c.cut.samples[r.sample].side == SampleSide::Dry {
            continue;
        }
        both += 1;
        assert!((r.indicator - (r.sigma_contact - r.sigma_fluid)).abs() < 1e-12 * (1.0 + r.sigma_contact.abs()));
        let contact = matches!(r.case, Some(Case::CoveredContact | Case::WetContact));
        assert_eq!(contact, r.sigma_contact <= r.sigma_fluid, "{r:?}");
    }
    assert!(both > 0);
}

proptest! {
    #[test]
    fn slip_length_decreases_with_gap(g1 in -0.5f64..2.0, g2 in -0.5f64..2.0, h in 0.01f64..1.0, k in 0.0f64..1.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(slip_length(lo, h, k) >= slip_length(hi, h, k));
        prop_assert!(slip_length(hi, h, k) >= 0.0);
    }
}

#[test]
fn slip_length_branches() {
    assert_eq!(slip_length(0.3, 0.2, 0.1), 0.0);
    assert_eq!(slip_length(0.2, 0.2, 0.1), 0.0);
    assert!((slip_length(0.05, 0.2, 0.1) - 0.1 * 0.2 * 3.0).abs() < 1e-15);
    assert_eq!(slip_length(0.0, 0.2, 0.1), f64::INFINITY);
    assert_eq!(slip_length(-0.01, 0.2, 0.1), f64::INFINITY);
}
