use proptest::prelude::*;

use fsci::cutcell::{build_cut_state, CutParams, CutState};
use fsci::fluid::{assemble_fluid, penalty_scale, FluidContext, FluidField, FluidHistory, FluidParams, StabParams};
use fsci::linalg::{Assembler, DofMap};
use fsci::mesh::{FluidGrid, SolidMesh};
use fsci::timefn::TimeScheme;
use fsci::Vec2;

struct Setup {
    grid: FluidGrid,
    cut: CutState,
    dm: DofMap,
    params: FluidParams,
}

/// Grid with a block cutting some elements.
fn setup(grid: FluidGrid, block: Option<(Vec2, Vec2)>, params: FluidParams) -> Setup {
    let mesh = match block {
        Some((lo, hi)) => {
            let mut m = SolidMesh::rectangle("s", lo, hi, 2, 2).unwrap();
            for s in ["bottom", "right", "top", "left"] {
                m.mark_coupling(&format!("s.{s}")).unwrap();
            }
            m
        }
        None => SolidMesh::new(vec![], vec![], vec![], Default::default(), vec![]).unwrap(),
    };
    let u = vec![0.0; 2 * mesh.nodes.len()];
    let cparams = CutParams {
        island_ratio: 0.0,
        ..CutParams::default()
    };
    let cut = build_cut_state(Some(&grid), &mesh, &u, &cparams, None).unwrap();
    let dm = DofMap::new(0, &cut.active_nodes);
    Setup { grid, cut, dm, params }
}

fn residual(s: &Setup, stab: &StabParams, state: &FluidField, old: &FluidHistory, scheme: &TimeScheme) -> Vec<f64> {
    let ctx = FluidContext {
        grid: &s.grid,
        cut: &s.cut,
        dofs: &s.dm,
        params: &s.params,
        stab,
        scheme,
        old,
        fluid_points: 2,
        t: 0.0,
    };
    let mut asm = Assembler::new(s.dm.n, false);
    assemble_fluid(&ctx, state, &mut asm);
    asm.r
}

fn off() -> StabParams {
    StabParams {
        cip: false,
        ghost: false,
        ..StabParams::default()
    }
}

fn field(grid: &FluidGrid, f: impl Fn(Vec2) -> (Vec2, f64)) -> FluidField {
    let mut st = FluidField::zeros(grid.n_nodes());
    for n in 0..grid.n_nodes() {
        let (v, p) = f(grid.node_pos(n));
        st.v[n] = v;
        st.p[n] = p;
        st.valid[n] = true;
    }
    st
}

#[test]
fn penalty_scale_formula() {
    let p = FluidParams::new(1e-3, 1.0);
    let phi = penalty_scale(&p, 0.05, 1.0, &TimeScheme::new(0.01, 1.0));
    assert!((phi - (1.0 + 5e-5 + 2.5e-4)).abs() < 1e-15);
}

#[test]
fn rest_state_has_zero_residual() {
    let s = setup(
        FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 6, 6).unwrap(),
        Some((Vec2::new(0.31, 0.27), Vec2::new(0.63, 0.58))),
        FluidParams::new(1.0, 0.1),
    );
    let st = field(&s.grid, |_| (Vec2::zeros(), 0.0));
    let r = residual(&s, &StabParams::default(), &st, &FluidHistory::zeros(s.grid.n_nodes()), &TimeScheme::new(0.1, 1.0));
    assert!(r.iter().all(|v| *v == 0.0));
}

/// Pressure kinked across the middle face of two unit elements: the face
/// term tested with the nodal field itself equals `c * |[dp/dn]|^2 * len`.
#[test]
fn pressure_jump_face_integral() {
    let mut params = FluidParams::new(0.0, 1.0);
    params.body_force = None;
    let s = setup(FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), 2, 1).unwrap(), None, params);
    let st = field(&s.grid, |x| (Vec2::zeros(), (x.x - 1.0).abs()));
    let old = FluidHistory::zeros(s.grid.n_nodes());
    let sc = TimeScheme::steady();
    let on = residual(&s, &StabParams::default(), &st, &old, &sc);
    let base = residual(&s, &off(), &st, &old, &sc);
    let tested: f64 = (0..s.grid.n_nodes()).map(|n| st.p[n] * (on[3 * n + 2] - base[3 * n + 2])).sum();
    // gamma_p h^3 / mu with h = mu = 1, jump 2, face length 1.
    assert!((tested - 0.05 * 4.0).abs() < 1e-13, "{tested}");
}

/// Same kink on a face next to a cut element: the ghost penalty adds its
/// own velocity and pressure jump terms.
#[test]
fn ghost_face_integral() {
    let s = setup(
        FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), 2, 1).unwrap(),
        Some((Vec2::new(1.5, -1.0), Vec2::new(3.0, 2.0))),
        FluidParams::new(0.0, 1.0),
    );
    assert_eq!(s.cut.ghost_faces.len(), 1);
    let st = field(&s.grid, |x| (Vec2::new((x.x - 1.0).abs(), 0.0), (x.x - 1.0).abs()));
    let old = FluidHistory::zeros(s.grid.n_nodes());
    let sc = TimeScheme::steady();
    let on = residual(&s, &StabParams::default(), &st, &old, &sc);
    let base = residual(&s, &off(), &st, &old, &sc);
    let mut tv = 0.0;
    let mut tp = 0.0;
    for n in 0..s.grid.n_nodes() {
        let b = s.dm.fluid_base[n].unwrap();
        tv += st.v[n].x * (on[b] - base[b]);
        tp += st.p[n] * (on[b + 2] - base[b + 2]);
    }
    // Velocity: gamma_gv mu h; pressure: (gamma_p + gamma_gp) h^3 / mu.
    assert!((tv - 0.05 * 4.0).abs() < 1e-13, "{tv}");
    assert!((tp - 0.1 * 4.0).abs() < 1e-13, "{tp}");
}

proptest! {
    #[test]
    fn face_terms_vanish_for_linear_fields(c in prop::collection::vec(-2.0f64..2.0, 9)) {
        let s = setup(
            FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 5, 5).unwrap(),
            Some((Vec2::new(0.33, 0.29), Vec2::new(0.71, 0.66))),
            FluidParams::new(1.0, 0.3),
        );
        let st = field(&s.grid, |x| {
            (
                Vec2::new(c[0] + c[1] * x.x + c[2] * x.y, c[3] + c[4] * x.x + c[5] * x.y),
                c[6] + c[7] * x.x + c[8] * x.y,
            )
        });
        let mut old = FluidHistory::zeros(s.grid.n_nodes());
        for n in 0..s.grid.n_nodes() {
            old.v[n] = st.v[n];
        }
        let sc = TimeScheme::new(0.1, 1.0);
        let on = residual(&s, &StabParams::default(), &st, &old, &sc);
        let base = residual(&s, &off(), &st, &old, &sc);
        let scale = base.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (a, b) in on.iter().zip(&base) {
            prop_assert!((a - b).abs() < 1e-12 * scale);
        }
    }
}
