//! Finite difference checks of the assembled Jacobian at frozen geometry.

use fsci::coupling::InterfaceParams;
use fsci::cutcell::{CutParams, SampleSide};
use fsci::fluid::{FluidField, FluidHistory, FluidParams, StabParams};
use fsci::linalg::DofMap;
use fsci::mesh::{FluidGrid, SolidMesh};
use fsci::solid::{NeoHooke, SolidBody, SolidHistory};
use fsci::solver::{assemble_raw, gather, scatter, NewtonParams, Problem, StepContext};
use fsci::timefn::TimeScheme;
use fsci::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn body(e: f64, rigid: bool) -> SolidBody {
    SolidBody {
        material: NeoHooke::new(e, 0.3, 1.0).unwrap(),
        rigid,
    }
}

fn problem(mesh: SolidMesh, bodies: Vec<SolidBody>) -> Problem {
    Problem {
        grid: Some(FluidGrid::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 10, 10).unwrap()),
        mesh,
        bodies,
        solid_loads: vec![],
        solid_dirichlet: vec![],
        fluid: Some(FluidParams::new(1.0, 0.5)),
        pressure_pin: None,
        stab: StabParams::default(),
        interface: InterfaceParams::default(),
        cut: CutParams::default(),
        newton: NewtonParams::default(),
        theta: 1.0,
    }
}

fn couple_all(mesh: &mut SolidMesh, name: &str) {
    for s in ["bottom", "right", "top", "left"] {
        mesh.mark_coupling(&format!("{name}.{s}")).unwrap();
    }
}

/// Compares analytic columns against central differences on a random
/// subset of unknowns. Returns the worst relative column error.
fn check(p: &Problem, u0: &[f64], rng: &mut ChaCha8Rng, columns: usize) -> f64 {
    let cut = p.build_cut(u0, None).unwrap();
    let dm: DofMap = p.dof_map(&cut);
    let nf = p.grid.as_ref().unwrap().n_nodes();
    let mut fluid = FluidField::zeros(nf);
    for n in 0..nf {
        fluid.v[n] = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        fluid.p[n] = rng.gen_range(-1.0..1.0);
        fluid.valid[n] = true;
    }
    let mut fold = FluidHistory::zeros(nf);
    for n in 0..nf {
        fold.v[n] = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        fold.a[n] = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    }
    let ns = p.mesh.nodes.len();
    let mut sold = SolidHistory::zeros(ns);
    for i in 0..2 * ns {
        sold.v[i] = rng.gen_range(-0.1..0.1);
    }
    let sc = StepContext {
        problem: p,
        cut: &cut,
        dofs: &dm,
        scheme: TimeScheme::new(0.1, 1.0),
        t: 0.1,
        solid_old: &sold,
        fluid_old: &fold,
    };
    let x0 = gather(&dm, u0, &fluid);
    let k = assemble_raw(&sc, u0, &fluid, true, None).unwrap().dense();
    let resid = |x: &[f64]| {
        let mut u = u0.to_vec();
        let mut f = fluid.clone();
        scatter(&dm, x, &mut u, &mut f);
        assemble_raw(&sc, &u, &f, false, None).unwrap().r
    };
    let mut worst: f64 = 0.0;
    for _ in 0..columns {
        let j = rng.gen_range(0..dm.n);
        let eps = 1e-6;
        let mut xp = x0.clone();
        xp[j] += eps;
        let mut xm = x0.clone();
        xm[j] -= eps;
        let (rp, rm) = (resid(&xp), resid(&xm));
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..dm.n {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            num += (fd - k[(i, j)]).powi(2);
            den += fd * fd;
        }
        let rel = num.sqrt() / den.sqrt().max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn fsi_tangent_matches_finite_differences() {
    let mut mesh = SolidMesh::rectangle("b", Vec2::new(0.33, 0.31), Vec2::new(0.67, 0.58), 4, 3).unwrap();
    couple_all(&mut mesh, "b");
    let p = problem(mesh, vec![body(50.0, false)]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u: Vec<f64> = (0..2 * p.mesh.nodes.len()).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let worst = check(&p, &u, &mut rng, 120);
    assert!(worst < 1e-5, "worst relative column error {worst:.3e}");
}

#[test]
fn rigid_contact_tangent_matches_finite_differences() {
    contact_case(true, 11);
}

#[test]
fn elastic_contact_tangent_matches_finite_differences() {
    contact_case(false, 13);
}

/// Elastic block resting close to a second block, with fluid around both.
fn contact_case(rigid_base: bool, seed: u64) {
    let mut top = SolidMesh::rectangle("top", Vec2::new(0.33, 0.43), Vec2::new(0.67, 0.7), 5, 4).unwrap();
    let base = SolidMesh::rectangle("base", Vec2::new(0.15, 0.15), Vec2::new(0.85, 0.43), 6, 3).unwrap();
    couple_all(&mut top, "top");
    let mut mesh = SolidMesh::merge(vec![top, base]).unwrap();
    couple_all(&mut mesh, "base");
    let p = problem(mesh, vec![body(50.0, false), body(80.0, rigid_base)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = p.mesh.nodes.len();
    let mut u: Vec<f64> = (0..2 * ns).map(|_| rng.gen_range(-0.004..0.004)).collect();
    if rigid_base {
        for n in p.mesh.body_nodes(1) {
            u[2 * n] = 0.0;
            u[2 * n + 1] = 0.0;
        }
    }
    // Lift the block so part of its bottom is inside the slip band.
    for n in p.mesh.body_nodes(0) {
        let x = p.mesh.nodes[n].x;
        u[2 * n + 1] += 0.02 * (x - 0.33) - 0.002;
    }
    let cut = p.build_cut(&u, None).unwrap();
    assert!(cut.samples.iter().any(|s| s.side != SampleSide::Fsi));
    assert!(cut.samples.iter().any(|s| s.side == SampleSide::Contact && s.gap < 0.0));
    assert!(cut.samples.iter().any(|s| s.side == SampleSide::Fsi && s.gap > 0.0 && s.gap < 0.1));
    let worst = check(&p, &u, &mut rng, 200);
    assert!(worst < 1e-4, "worst relative column error {worst:.3e}");
}
