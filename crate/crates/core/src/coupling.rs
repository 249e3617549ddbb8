//! Weak coupling on the solid boundaries: fluid-structure interaction,
//! solid-solid contact and the transition between them.
//!
//! Every interface quadrature sample compares the fluid normal traction with
//! the contact normal traction. The smaller (more compressive) of the two
//! acts on the solid; on wetted samples the fluid always receives its own
//! Nitsche terms. Tangentially a Navier slip condition with a gap dependent
//! slip length blends from no-slip far from contact to perfect slip in
//! contact.

use crate::cutcell::{CutState, InterfaceSample, SampleSide};
use crate::error::Result;
use crate::fluid::{penalty_scale as fluid_penalty_scale, FluidField, FluidHistory, FluidParams};
use crate::geom::Vec2;
use crate::linalg::{Assembler, DofMap};
use crate::mesh::{q4_shape, FluidGrid, SolidMesh};
use crate::solid::{cauchy_nn, penalty_scale as solid_penalty_scale, SolidBody, SolidHistory};
use crate::timefn::TimeScheme;

/// Scalar with a sparse gradient with respect to global unknowns.
#[derive(Clone, Debug, Default)]
pub struct Lin {
    pub val: f64,
    pub grad: Vec<(usize, f64)>,
}

impl Lin {
    pub fn constant(val: f64) -> Self {
        Lin { val, grad: Vec::new() }
    }

    pub fn scale(&self, s: f64) -> Lin {
        Lin {
            val: self.val * s,
            grad: self.grad.iter().map(|&(i, g)| (i, g * s)).collect(),
        }
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut grad = Vec::with_capacity(self.grad.len() + o.grad.len());
        grad.extend_from_slice(&self.grad);
        grad.extend_from_slice(&o.grad);
        Lin {
            val: self.val + o.val,
            grad,
        }
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Lin) -> Lin {
        let mut grad = Vec::with_capacity(self.grad.len() + o.grad.len());
        grad.extend(self.grad.iter().map(|&(i, g)| (i, g * o.val)));
        grad.extend(o.grad.iter().map(|&(i, g)| (i, g * self.val)));
        Lin {
            val: self.val * o.val,
            grad,
        }
    }

    pub fn add_const(&self, c: f64) -> Lin {
        Lin {
            val: self.val + c,
            grad: self.grad.clone(),
        }
    }
}

/// Test function as a list of (unknown, coefficient).
type Test = Vec<(usize, f64)>;

/// Adds `w * test * q` to the residual and its derivative to the Jacobian.
fn add_term(asm: &mut Assembler, test: &Test, q: &Lin, w: f64) {
    for &(i, c) in test {
        let f = w * c;
        asm.add_r(i, f * q.val);
        if asm.with_matrix {
            for &(j, g) in &q.grad {
                asm.add_k(i, j, f * g);
            }
        }
    }
}

fn scaled(test: &Test, s: f64) -> Test {
    test.iter().map(|&(i, c)| (i, c * s)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// Weights proportional to the stiffness of the opposing body.
    Harmonic,
    Equal,
}

#[derive(Clone, Debug)]
pub struct InterfaceParams {
    /// Normal Nitsche penalty factor on the fluid side.
    pub gamma_f0: f64,
    /// Tangential Nitsche penalty factor.
    pub gamma_t0: f64,
    /// Contact penalty factor.
    pub gamma_s0: f64,
    /// Dimensionless slip-length coefficient.
    pub kappa0: f64,
    pub weighting: Weighting,
}

impl Default for InterfaceParams {
    fn default() -> Self {
        InterfaceParams {
            gamma_f0: 10.0,
            gamma_t0: 10.0,
            gamma_s0: 1.0,
            kappa0: 0.1,
            weighting: Weighting::Harmonic,
        }
    }
}

/// Which normal traction acts on the solid at a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// Wetted sample, fluid traction on the solid.
    WetFluid = 1,
    /// Covered sample, contact traction on the solid.
    CoveredContact = 2,
    /// Wetted sample, contact traction on the solid.
    WetContact = 3,
    /// Covered sample, extended fluid traction on the solid.
    CoveredFluid = 4,
}

/// Slip length for a normal gap `g` and element size `h`. Zero (no-slip)
/// beyond one element, infinite (perfect slip) in contact.
pub fn slip_length(g: f64, h: f64, kappa0: f64) -> f64 {
    if g > h {
        0.0
    } else if g > 0.0 {
        kappa0 * h * (h / g - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Difference of the contact and the fluid normal traction candidates.
/// Non-positive values select the contact traction.
pub fn case_indicator(sigma_bar: f64, gamma_s: f64, g: f64, sigma_f: f64, gamma_f: f64, v_rel: f64) -> f64 {
    (sigma_bar + gamma_s * g) - (sigma_f + gamma_f * v_rel)
}

/// Everything the coupling assembly reads.
pub struct CouplingContext<'a> {
    pub grid: Option<&'a FluidGrid>,
    pub cut: &'a CutState,
    pub dofs: &'a DofMap,
    pub mesh: &'a SolidMesh,
    pub bodies: &'a [SolidBody],
    pub fluid: Option<&'a FluidParams>,
    pub params: &'a InterfaceParams,
    pub scheme: &'a TimeScheme,
    pub fluid_old: Option<&'a FluidHistory>,
    pub solid_old: &'a SolidHistory,
    /// Interface element size.
    pub h: f64,
}

/// Per-sample diagnostics of one assembly.
#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub sample: usize,
    pub case: Option<Case>,
    pub indicator: f64,
    pub gap: f64,
    pub slip_length: f64,
    pub sigma_fluid: f64,
    pub sigma_contact: f64,
}

/// Forces on solid nodes split by origin, plus per-sample diagnostics.
#[derive(Clone, Debug, Default)]
pub struct CouplingRecord {
    /// Nodal force from fluid tractions (two entries per solid node).
    pub fsi_force: Vec<f64>,
    /// Nodal force from contact tractions.
    pub contact_force: Vec<f64>,
    pub samples: Vec<SampleRecord>,
}

/// Fluid quantities at a wetted sample.
struct FluidAt {
    /// Normal fluid traction `n . sigma n`.
    sigma_nn: Lin,
    /// Tangential fluid traction `t . sigma n`.
    tau: Lin,
    /// Relative normal velocity `(v - du/dt) . n`.
    v_rel: Lin,
    /// Relative tangential velocity.
    s_rel: Lin,
    gamma_f: f64,
    test_vn: Test,
    test_vt: Test,
    test_p: Test,
    test_nen: Test,
    test_ten: Test,
}

struct Eval<'a> {
    ctx: &'a CouplingContext<'a>,
    u: &'a [f64],
    fluid: Option<&'a FluidField>,
}

impl<'a> Eval<'a> {
    fn solid_test(&self, e: usize, xi: &Vec2, dir: &Vec2) -> Test {
        let (nn, _) = q4_shape(xi);
        let conn = self.ctx.mesh.elements[e];
        let mut t = Vec::with_capacity(8);
        for a in 0..4 {
            for k in 0..2 {
                t.push((self.ctx.dofs.solid(conn[a], k), nn[a] * dir[k]));
            }
        }
        t
    }

    /// Solid velocity along `dir` at a local point.
    fn solid_rate(&self, e: usize, xi: &Vec2, dir: &Vec2) -> Lin {
        let (nn, _) = q4_shape(xi);
        let conn = self.ctx.mesh.elements[e];
        let old = self.ctx.solid_old;
        let sc = self.ctx.scheme;
        let cf = sc.rate_factor();
        let mut l = Lin::constant(0.0);
        for a in 0..4 {
            for k in 0..2 {
                let i = self.ctx.dofs.solid(conn[a], k);
                let r = sc.rate(self.u[i], old.u[i], old.v[i]);
                l.val += nn[a] * dir[k] * r;
                l.grad.push((i, nn[a] * dir[k] * cf));
            }
        }
        l
    }

    fn position(&self, e: usize, xi: &Vec2, n: &Vec2, sign: f64) -> Lin {
        let (nn, _) = q4_shape(xi);
        let conn = self.ctx.mesh.elements[e];
        let mut l = Lin::constant(0.0);
        for a in 0..4 {
            let x = self.ctx.mesh.position(conn[a], self.u);
            l.val += sign * nn[a] * x.dot(n);
            for k in 0..2 {
                l.grad.push((self.ctx.dofs.solid(conn[a], k), sign * nn[a] * n[k]));
            }
        }
        l
    }

    fn stress_nn(&self, e: usize, xi: &Vec2, n: &Vec2) -> Result<Lin> {
        let body = &self.ctx.bodies[self.ctx.mesh.element_body[e]];
        if body.rigid {
            return Ok(Lin::constant(0.0));
        }
        let (val, g) = cauchy_nn(self.ctx.mesh, &body.material, e, xi, self.u, n)?;
        let conn = self.ctx.mesh.elements[e];
        let grad = (0..8).map(|k| (self.ctx.dofs.solid(conn[k / 2], k % 2), g[k])).collect();
        Ok(Lin { val, grad })
    }

    fn fluid_at(&self, s: &InterfaceSample) -> FluidAt {
        let grid = self.ctx.grid.expect("wetted samples need a fluid grid");
        let fluid = self.fluid.expect("wetted samples need a fluid state");
        let params = self.ctx.fluid.expect("wetted samples need fluid parameters");
        let e = s.fluid_elem.expect("wetted sample without host element");
        let mu = params.viscosity;
        let n = s.normal;
        let t = Vec2::new(-n.y, n.x);
        let (nn, g) = grid.shape(e, &s.x);
        let nodes = grid.elem_nodes(e);
        let mut sigma_nn = Lin::constant(0.0);
        let mut tau = Lin::constant(0.0);
        let mut vn = Lin::constant(0.0);
        let mut vt = Lin::constant(0.0);
        let (mut test_vn, mut test_vt, mut test_p, mut test_nen, mut test_ten) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..4 {
            let b = self.ctx.dofs.fluid_base[nodes[i]].expect("host element node must be active");
            let (v, p) = (fluid.v[nodes[i]], fluid.p[nodes[i]]);
            let (gn, gt) = (g[i].dot(&n), g[i].dot(&t));
            sigma_nn.val += -p * nn[i] + 2.0 * mu * v.dot(&n) * gn;
            sigma_nn.grad.push((b + 2, -nn[i]));
            tau.val += mu * (v.dot(&t) * gn + v.dot(&n) * gt);
            vn.val += nn[i] * v.dot(&n);
            vt.val += nn[i] * v.dot(&t);
            test_p.push((b + 2, nn[i]));
            for k in 0..2 {
                sigma_nn.grad.push((b + k, 2.0 * mu * n[k] * gn));
                tau.grad.push((b + k, mu * (t[k] * gn + n[k] * gt)));
                vn.grad.push((b + k, nn[i] * n[k]));
                vt.grad.push((b + k, nn[i] * t[k]));
                test_vn.push((b + k, nn[i] * n[k]));
                test_vt.push((b + k, nn[i] * t[k]));
                test_nen.push((b + k, n[k] * gn));
                test_ten.push((b + k, 0.5 * (t[k] * gn + n[k] * gt)));
            }
        }
        let v_rel = vn.sub(&self.solid_rate(s.element, &s.xi, &n));
        let s_rel = vt.sub(&self.solid_rate(s.element, &s.xi, &t));
        let speed = self
            .ctx
            .fluid_old
            .map_or(0.0, |old| old.elem_speed(grid, e));
        let h = self.ctx.h;
        let gamma_f = self.ctx.params.gamma_f0 * fluid_penalty_scale(params, h, speed, self.ctx.scheme) / h;
        FluidAt {
            sigma_nn,
            tau,
            v_rel,
            s_rel,
            gamma_f,
            test_vn,
            test_vt,
            test_p,
            test_nen,
            test_ten,
        }
    }
}

/// Contact data of a sample: averaged solid normal stress, penalty, gap
/// and the test function of the normal displacement jump.
struct ContactAt {
    sigma_bar: Lin,
    gamma_s: f64,
    gap: Option<Lin>,
    jump_test: Test,
    /// Integration weight factor (one half when both sides are elastic and
    /// each carries its own samples).
    weight: f64,
}

fn contact_at(ev: &Eval, s: &InterfaceSample) -> Result<ContactAt> {
    let ctx = ev.ctx;
    let n = s.normal;
    let own_mat = &ctx.bodies[s.body].material;
    let h_own = ctx.mesh.element_size(s.edge);
    let phi_a = solid_penalty_scale(own_mat, h_own);
    let sigma_a = ev.stress_nn(s.element, &s.xi, &n)?;
    let own_test = ev.solid_test(s.element, &s.xi, &n);
    let Some(p) = s.partner.as_ref() else {
        return Ok(ContactAt {
            sigma_bar: sigma_a,
            gamma_s: ctx.params.gamma_s0 * phi_a,
            gap: None,
            jump_test: own_test,
            weight: 1.0,
        });
    };
    let gap = ev.position(p.element, &p.xi, &n, 1.0).add(&ev.position(s.element, &s.xi, &n, -1.0));
    let partner_body = &ctx.bodies[p.body];
    if partner_body.rigid {
        return Ok(ContactAt {
            sigma_bar: sigma_a,
            gamma_s: ctx.params.gamma_s0 * phi_a,
            gap: Some(gap),
            jump_test: own_test,
            weight: 1.0,
        });
    }
    let phi_b = solid_penalty_scale(&partner_body.material, ctx.mesh.element_size(p.edge));
    let omega = match ctx.params.weighting {
        Weighting::Harmonic => phi_b / (phi_a + phi_b),
        Weighting::Equal => 0.5,
    };
    let sigma_b = ev.stress_nn(p.element, &p.xi, &n)?;
    let sigma_bar = sigma_a.scale(omega).add(&sigma_b.scale(1.0 - omega));
    let mut jump_test = own_test;
    jump_test.extend(scaled(&ev.solid_test(p.element, &p.xi, &n), -1.0));
    Ok(ContactAt {
        sigma_bar,
        gamma_s: ctx.params.gamma_s0 * 2.0 * phi_a * phi_b / (phi_a + phi_b),
        gap: Some(gap),
        jump_test,
        weight: 0.5,
    })
}

/// Gap dependent factor `1 / (kappa mu + h_t)` of the slip condition.
fn slip_factor(gap: Option<&Lin>, h: f64, kappa0: f64, mu: f64, ht: f64) -> Lin {
    let Some(g) = gap else {
        return Lin::constant(1.0 / ht);
    };
    let kappa = slip_length(g.val, h, kappa0);
    if kappa == 0.0 {
        Lin::constant(1.0 / ht)
    } else if kappa.is_infinite() {
        Lin::constant(0.0)
    } else {
        let a = 1.0 / (kappa * mu + ht);
        let dkappa = -kappa0 * h * h / (g.val * g.val);
        g.scale(-a * a * mu * dkappa).add_const(a - g.val * (-a * a * mu * dkappa))
    }
}

fn record_force(rec: &mut Option<&mut CouplingRecord>, contact: bool, test: &Test, q: f64, w: f64, n_solid: usize) {
    if let Some(r) = rec.as_deref_mut() {
        let target = if contact { &mut r.contact_force } else { &mut r.fsi_force };
        for &(i, c) in test {
            if i < 2 * n_solid {
                target[i] -= w * c * q;
            }
        }
    }
}

/// Assembles all interface terms.
pub fn assemble_coupling(
    ctx: &CouplingContext,
    u: &[f64],
    fluid: Option<&FluidField>,
    asm: &mut Assembler,
    record: Option<&mut CouplingRecord>,
) -> Result<()> {
    assemble_coupling_forced(ctx, u, fluid, asm, record, None)
}

/// Like [`assemble_coupling`], but `force_contact` overrides the traction
/// choice at every sample that has both candidates.
pub fn assemble_coupling_forced(
    ctx: &CouplingContext,
    u: &[f64],
    fluid: Option<&FluidField>,
    asm: &mut Assembler,
    mut record: Option<&mut CouplingRecord>,
    force_contact: Option<bool>,
) -> Result<()> {
    let ev = Eval { ctx, u, fluid };
    let n_solid = ctx.mesh.nodes.len();
    if let Some(r) = record.as_deref_mut() {
        r.fsi_force = vec![0.0; 2 * n_solid];
        r.contact_force = vec![0.0; 2 * n_solid];
        r.samples.clear();
    }
    let samples = &ctx.cut.samples;
    // Fluid quantities of wetted samples, reused by covered samples.
    let wet: Vec<Option<FluidAt>> = samples
        .iter()
        .map(|s| (s.side == SampleSide::Fsi).then(|| ev.fluid_at(s)))
        .collect();
    let mu = ctx.fluid.map_or(0.0, |f| f.viscosity);
    let ht = ctx.h / ctx.params.gamma_t0;
    for (idx, s) in samples.iter().enumerate() {
        let rigid = ctx.bodies[s.body].rigid;
        let w = s.weight;
        let mut rec = SampleRecord {
            sample: idx,
            case: None,
            indicator: f64::NAN,
            gap: s.gap,
            slip_length: f64::NAN,
            sigma_fluid: f64::NAN,
            sigma_contact: f64::NAN,
        };
        match s.side {
            SampleSide::Fsi => {
                let f = wet[idx].as_ref().unwrap();
                let fl_trac = f.sigma_nn.add(&f.v_rel.scale(f.gamma_f));
                // Fluid side normal terms.
                add_term(asm, &f.test_vn, &fl_trac, w);
                let mut adj = f.test_p.clone();
                adj.extend(scaled(&f.test_nen, -2.0 * mu));
                add_term(asm, &adj, &f.v_rel, w);
                // Tangential slip terms.
                let gap_lin = s.partner.as_ref().map(|p| {
                    ev.position(p.element, &p.xi, &s.normal, 1.0)
                        .add(&ev.position(s.element, &s.xi, &s.normal, -1.0))
                });
                let a = slip_factor(gap_lin.as_ref(), ctx.h, ctx.params.kappa0, mu, ht);
                rec.slip_length = gap_lin
                    .as_ref()
                    .map_or(0.0, |g| slip_length(g.val, ctx.h, ctx.params.kappa0));
                let hta = a.scale(ht);
                let q1 = hta.mul(&f.tau).add(&a.mul(&f.s_rel).scale(mu));
                let one_minus = hta.scale(-1.0).add_const(1.0);
                let q2 = hta.mul(&f.s_rel).sub(&one_minus.mul(&f.tau).scale(ht / mu));
                add_term(asm, &f.test_vt, &q1, w);
                add_term(asm, &scaled(&f.test_ten, -2.0 * mu), &q2, w);
                rec.sigma_fluid = fl_trac.val;
                if rigid {
                    rec.case = Some(Case::WetFluid);
                    record_samples(&mut record, rec);
                    continue;
                }
                let ut = ev.solid_test(s.element, &s.xi, &Vec2::new(-s.normal.y, s.normal.x));
                add_term(asm, &scaled(&ut, -1.0), &q1, w);
                record_force(&mut record, false, &scaled(&ut, -1.0), q1.val, w, n_solid);
                let c = contact_at(&ev, s)?;
                let ct_trac = match &c.gap {
                    Some(g) => Some(c.sigma_bar.add(&g.scale(c.gamma_s))),
                    None => None,
                };
                let ind = ct_trac.as_ref().map_or(f64::INFINITY, |ct| ct.val - fl_trac.val);
                rec.indicator = ind;
                rec.sigma_contact = ct_trac.as_ref().map_or(f64::NAN, |c| c.val);
                let contact = match (force_contact, &ct_trac) {
                    (Some(f), Some(_)) => f,
                    _ => ind <= 0.0,
                };
                if !contact {
                    rec.case = Some(Case::WetFluid);
                    let un = scaled(&ev.solid_test(s.element, &s.xi, &s.normal), -1.0);
                    add_term(asm, &un, &fl_trac, w);
                    record_force(&mut record, false, &un, fl_trac.val, w, n_solid);
                } else {
                    rec.case = Some(Case::WetContact);
                    let ct = ct_trac.unwrap();
                    let jt = scaled(&c.jump_test, -1.0);
                    add_term(asm, &jt, &ct, w * c.weight);
                    record_force(&mut record, true, &jt, ct.val, w * c.weight, n_solid);
                }
            }
            SampleSide::Contact | SampleSide::Dry => {
                if rigid {
                    record_samples(&mut record, rec);
                    continue;
                }
                let c = contact_at(&ev, s)?;
                let ct = c.gap.as_ref().map(|g| c.sigma_bar.add(&g.scale(c.gamma_s)));
                let ext = if s.side == SampleSide::Contact {
                    s.ext_source.and_then(|k| wet[k].as_ref())
                } else {
                    None
                };
                let fl = ext.map(|f| f.sigma_nn.add(&f.v_rel.scale(f.gamma_f)));
                let fl_val = fl.as_ref().map_or(0.0, |f| f.val);
                let ind = ct.as_ref().map_or(f64::INFINITY, |ct| ct.val - fl_val);
                rec.indicator = ind;
                rec.sigma_fluid = fl_val;
                rec.sigma_contact = ct.as_ref().map_or(f64::NAN, |c| c.val);
                let jt = scaled(&c.jump_test, -1.0);
                let contact = match (force_contact, &ct, &fl) {
                    (Some(f), Some(_), Some(_)) => f,
                    _ => ind <= 0.0,
                };
                if contact {
                    rec.case = Some(Case::CoveredContact);
                    let ct = ct.unwrap();
                    add_term(asm, &jt, &ct, w * c.weight);
                    record_force(&mut record, true, &jt, ct.val, w * c.weight, n_solid);
                } else if let Some(fl) = fl {
                    rec.case = Some(Case::CoveredFluid);
                    add_term(asm, &jt, &fl, w * c.weight);
                    record_force(&mut record, false, &jt, fl.val, w * c.weight, n_solid);
                }
            }
        }
        record_samples(&mut record, rec);
    }
    Ok(())
}

fn record_samples(record: &mut Option<&mut CouplingRecord>, rec: SampleRecord) {
    if let Some(r) = record.as_deref_mut() {
        r.samples.push(rec);
    }
}

/// Solid-side normal traction candidates at a sample, for diagnostics and
/// tests: returns `(sigma_bar, gamma_s, gap)`.
pub fn contact_candidate(ctx: &CouplingContext, u: &[f64], s: &InterfaceSample) -> Result<(f64, f64, f64)> {
    let ev = Eval { ctx, u, fluid: None };
    let c = contact_at(&ev, s)?;
    Ok((c.sigma_bar.val, c.gamma_s, c.gap.map_or(f64::INFINITY, |g| g.val)))
}
