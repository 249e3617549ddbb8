//! Compressible Neo-Hookean solids in plane strain, total Lagrangian form.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::linalg::Assembler;
use crate::mesh::{q4_edge_point, q4_shape, SolidMesh};
use crate::quadrature::{gauss_legendre, gauss_square};
use crate::timefn::{TimeFunction, TimeScheme};

pub type Tangent = [[[[f64; 2]; 2]; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeoHooke {
    pub youngs: f64,
    pub poisson: f64,
    pub density: f64,
}

impl NeoHooke {
    pub fn new(youngs: f64, poisson: f64, density: f64) -> Result<Self> {
        if !(youngs > 0.0) {
            return Err(Error::Config("Young's modulus must be positive".into()));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::Config("Poisson's ratio must lie in (-1, 0.5)".into()));
        }
        if !(density >= 0.0) {
            return Err(Error::Config("solid density must be non-negative".into()));
        }
        Ok(NeoHooke {
            youngs,
            poisson,
            density,
        })
    }

    fn c(&self) -> f64 {
        self.youngs / (4.0 * (1.0 + self.poisson))
    }

    fn beta(&self) -> f64 {
        self.poisson / (1.0 - 2.0 * self.poisson)
    }

    /// Strain energy density per reference volume.
    pub fn energy(&self, f: &Matrix2<f64>) -> f64 {
        let c = self.c();
        let b = self.beta();
        let j = f.determinant();
        let trc = (f.transpose() * f).trace() + 1.0;
        let vol = if b == 0.0 {
            -2.0 * c * j.ln()
        } else {
            c / b * (j.powf(-2.0 * b) - 1.0)
        };
        c * (trc - 3.0) + vol
    }

    /// Second Piola-Kirchhoff stress and material tangent `dS/dE`.
    pub fn stress(&self, f: &Matrix2<f64>) -> (Matrix2<f64>, Tangent) {
        let c = self.c();
        let b = self.beta();
        let j = f.determinant();
        let cg = f.transpose() * f;
        let ci = cg.try_inverse().unwrap_or_else(Matrix2::zeros);
        let jb = j.powf(-2.0 * b);
        let s = (Matrix2::identity() - ci * jb) * (2.0 * c);
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for jj in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t[i][jj][k][l] = 4.0 * c * b * jb * ci[(i, jj)] * ci[(k, l)]
                            + 2.0 * c * jb * (ci[(i, k)] * ci[(jj, l)] + ci[(i, l)] * ci[(jj, k)]);
                    }
                }
            }
        }
        (s, t)
    }

    /// Cauchy stress.
    pub fn cauchy(&self, f: &Matrix2<f64>) -> Matrix2<f64> {
        let (s, _) = self.stress(f);
        f * s * f.transpose() / f.determinant()
    }
}

/// Per-body solid properties.
#[derive(Clone, Debug)]
pub struct SolidBody {
    pub material: NeoHooke,
    /// Rigid bodies have all degrees of freedom prescribed.
    pub rigid: bool,
}

/// Dead traction on reference boundary edges.
#[derive(Clone, Debug)]
pub struct SolidLoad {
    pub edges: Vec<usize>,
    pub traction: [TimeFunction; 2],
}

/// Nodal solid history at the old time level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolidHistory {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl SolidHistory {
    pub fn zeros(n_nodes: usize) -> Self {
        SolidHistory {
            u: vec![0.0; 2 * n_nodes],
            v: vec![0.0; 2 * n_nodes],
            a: vec![0.0; 2 * n_nodes],
        }
    }

    /// Nodal velocities and accelerations consistent with `u` at the new
    /// time level.
    pub fn rates(&self, u: &[f64], scheme: &TimeScheme) -> (Vec<f64>, Vec<f64>) {
        let v: Vec<f64> = (0..u.len()).map(|i| scheme.rate(u[i], self.u[i], self.v[i])).collect();
        let a = (0..u.len()).map(|i| scheme.rate(v[i], self.v[i], self.a[i])).collect();
        (v, a)
    }
}

/// Deformation gradient, reference shape gradients and reference Jacobian
/// determinant at a local point.
pub fn kinematics(mesh: &SolidMesh, e: usize, xi: &Vec2, u: &[f64]) -> Result<(Matrix2<f64>, [Vec2; 4], f64)> {
    let (_, dxi) = q4_shape(xi);
    let conn = mesh.elements[e];
    let mut j0 = Matrix2::zeros();
    for a in 0..4 {
        j0 += mesh.nodes[conn[a]] * dxi[a].transpose();
    }
    let det0 = j0.determinant();
    let inv = j0
        .try_inverse()
        .ok_or(Error::ElementInversion { element: e, det: det0 })?;
    let mut dx = [Vec2::zeros(); 4];
    let mut f = Matrix2::identity();
    for a in 0..4 {
        dx[a] = inv.transpose() * dxi[a];
        let ua = Vec2::new(u[2 * conn[a]], u[2 * conn[a] + 1]);
        f += ua * dx[a].transpose();
    }
    Ok((f, dx, det0))
}

/// Normal Cauchy stress `n . sigma n` at a local point and its derivative
/// with respect to the eight element displacement unknowns.
pub fn cauchy_nn(mesh: &SolidMesh, mat: &NeoHooke, e: usize, xi: &Vec2, u: &[f64], n: &Vec2) -> Result<(f64, [f64; 8])> {
    let (f, dx, _) = kinematics(mesh, e, xi, u)?;
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::ElementInversion { element: e, det: j });
    }
    let (s, t) = mat.stress(&f);
    let m = f.transpose() * n;
    let sm = s * m;
    let val = m.dot(&sm) / j;
    let finv_t = f.try_inverse().unwrap().transpose();
    // d(sigma_nn)/dF_kL
    let mut dfk = Matrix2::zeros();
    for k in 0..2 {
        for l in 0..2 {
            let mut cm = 0.0;
            for i in 0..2 {
                for jj in 0..2 {
                    for mm in 0..2 {
                        cm += m[i] * t[i][jj][l][mm] * f[(k, mm)] * m[jj];
                    }
                }
            }
            dfk[(k, l)] = -val * finv_t[(k, l)] + (2.0 * sm[l] * n[k] + cm) / j;
        }
    }
    let mut grad = [0.0; 8];
    for a in 0..4 {
        for k in 0..2 {
            grad[2 * a + k] = dfk[(k, 0)] * dx[a].x + dfk[(k, 1)] * dx[a].y;
        }
    }
    Ok((val, grad))
}

/// Contact penalty scaling of a solid: Young's modulus over element size.
pub fn penalty_scale(mat: &NeoHooke, h: f64) -> f64 {
    mat.youngs / h
}

/// Adds inertia, internal forces and dead loads of all elastic bodies.
/// Unknown `2 n + c` is displacement component `c` of solid node `n`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_solid(
    mesh: &SolidMesh,
    bodies: &[SolidBody],
    loads: &[SolidLoad],
    u: &[f64],
    old: &SolidHistory,
    scheme: &TimeScheme,
    t: f64,
    asm: &mut Assembler,
) -> Result<()> {
    let (_, acc) = old.rates(u, scheme);
    let mfac = scheme.rate_factor() * scheme.rate_factor();
    let gp = gauss_square(2);
    for (e, conn) in mesh.elements.iter().enumerate() {
        let body = &bodies[mesh.element_body[e]];
        if body.rigid {
            continue;
        }
        let mat = &body.material;
        let dofs: [usize; 8] = std::array::from_fn(|k| 2 * conn[k / 2] + k % 2);
        let mut re = [0.0; 8];
        let mut ke = [[0.0; 8]; 8];
        for (xi, w) in &gp {
            let (f, dx, det0) = kinematics(mesh, e, xi, u)?;
            let jdet = f.determinant();
            if !(jdet > 0.0) {
                return Err(Error::ElementInversion { element: e, det: jdet });
            }
            let (nn, _) = q4_shape(xi);
            let wq = w * det0;
            let (s, ct) = mat.stress(&f);
            let p = f * s;
            let mut a_q = Vec2::zeros();
            for b in 0..4 {
                a_q += Vec2::new(acc[dofs[2 * b]], acc[dofs[2 * b + 1]]) * nn[b];
            }
            for a in 0..4 {
                let pa = p * dx[a];
                for i in 0..2 {
                    re[2 * a + i] += wq * (pa[i] + mat.density * nn[a] * a_q[i]);
                }
            }
            if !asm.with_matrix {
                continue;
            }
            // B[a][i] = dE/du_{a,i} as a symmetric 2x2 matrix.
            let bmat = |a: usize, i: usize| -> Matrix2<f64> {
                let g = f.row(i).transpose();
                let m = g * dx[a].transpose();
                (m + m.transpose()) * 0.5
            };
            let bs: [[Matrix2<f64>; 2]; 4] = std::array::from_fn(|a| [bmat(a, 0), bmat(a, 1)]);
            for a in 0..4 {
                for b in 0..4 {
                    let geo = dx[a].dot(&(s * dx[b]));
                    let mass = mat.density * nn[a] * nn[b] * mfac;
                    for i in 0..2 {
                        for k in 0..2 {
                            let (ba, bb) = (&bs[a][i], &bs[b][k]);
                            let mut m = 0.0;
                            for ii in 0..2 {
                                for jj in 0..2 {
                                    if ba[(ii, jj)] == 0.0 {
                                        continue;
                                    }
                                    for kk in 0..2 {
                                        for ll in 0..2 {
                                            m += ba[(ii, jj)] * ct[ii][jj][kk][ll] * bb[(kk, ll)];
                                        }
                                    }
                                }
                            }
                            let diag = if i == k { geo + mass } else { 0.0 };
                            ke[2 * a + i][2 * b + k] += wq * (m + diag);
                        }
                    }
                }
            }
        }
        for p in 0..8 {
            asm.add_r(dofs[p], re[p]);
            for q in 0..8 {
                asm.add_k(dofs[p], dofs[q], ke[p][q]);
            }
        }
    }
    let g2 = gauss_legendre(2);
    for load in loads {
        let tr = Vec2::new(load.traction[0].eval(t), load.traction[1].eval(t));
        if tr == Vec2::zeros() {
            continue;
        }
        for &be in &load.edges {
            let edge = &mesh.boundary[be];
            if bodies[edge.body].rigid {
                continue;
            }
            let conn = mesh.elements[edge.element];
            for &(q, w) in &g2 {
                let s = 0.5 * (q + 1.0);
                let (nn, _) = q4_shape(&q4_edge_point(edge.local, s));
                for a in 0..4 {
                    for i in 0..2 {
                        asm.add_r(2 * conn[a] + i, -0.5 * w * edge.length0 * nn[a] * tr[i]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Solid velocity at a local point of element `e`.
pub fn velocity_at(mesh: &SolidMesh, e: usize, xi: &Vec2, vel: &[f64]) -> Vec2 {
    let (nn, _) = q4_shape(xi);
    mesh.elements[e]
        .iter()
        .zip(nn)
        .fold(Vec2::zeros(), |s, (&n, w)| s + Vec2::new(vel[2 * n], vel[2 * n + 1]) * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stress_free_reference() {
        let m = NeoHooke::new(100.0, 0.3, 1.0).unwrap();
        let (s, _) = m.stress(&Matrix2::identity());
        assert!(s.norm() < 1e-13);
    }

    #[test]
    fn stress_is_energy_derivative() {
        for nu in [0.0, 0.3, 0.45] {
            let m = NeoHooke::new(10.0, nu, 1.0).unwrap();
            let f = Matrix2::new(1.1, 0.2, -0.1, 0.9);
            let (s, _) = m.stress(&f);
            let p = f * s;
            let h = 1e-6;
            for i in 0..2 {
                for j in 0..2 {
                    let mut fp = f;
                    fp[(i, j)] += h;
                    let mut fm = f;
                    fm[(i, j)] -= h;
                    let d = (m.energy(&fp) - m.energy(&fm)) / (2.0 * h);
                    assert!((d - p[(i, j)]).abs() < 1e-7, "nu={nu} {i}{j}: {d} vs {}", p[(i, j)]);
                }
            }
        }
    }
}
