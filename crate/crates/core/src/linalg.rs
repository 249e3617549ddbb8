//! Global assembly buffers and the sparse direct solve.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};

/// Residual vector plus Jacobian triplets. Duplicate triplets are summed when
/// the matrix is built.
#[derive(Clone, Debug, Default)]
pub struct Assembler {
    pub r: Vec<f64>,
    pub trip: Vec<(usize, usize, f64)>,
    pub with_matrix: bool,
}

impl Assembler {
    pub fn new(n: usize, with_matrix: bool) -> Self {
        Assembler {
            r: vec![0.0; n],
            trip: Vec::new(),
            with_matrix,
        }
    }

    #[inline]
    pub fn add_r(&mut self, i: usize, v: f64) {
        self.r[i] += v;
    }

    #[inline]
    pub fn add_k(&mut self, i: usize, j: usize, v: f64) {
        if self.with_matrix && v != 0.0 {
            self.trip.push((i, j, v));
        }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// Dense copy of the Jacobian (for tests and diagnostics).
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for &(i, j, v) in &self.trip {
            m[(i, j)] += v;
        }
        m
    }
}

/// Global numbering: two displacement unknowns per solid node first, then
/// velocity and pressure unknowns of every active grid node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DofMap {
    pub n_solid_nodes: usize,
    /// First of the three unknowns of each grid node, if active.
    pub fluid_base: Vec<Option<usize>>,
    pub n: usize,
    /// Unknowns with prescribed values.
    pub dirichlet: Vec<bool>,
}

/// Field an unknown belongs to, used for per-field residual norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Solid,
    Momentum,
    Continuity,
}

impl DofMap {
    pub fn new(n_solid_nodes: usize, active: &[bool]) -> Self {
        let mut n = 2 * n_solid_nodes;
        let fluid_base = active
            .iter()
            .map(|&a| {
                a.then(|| {
                    n += 3;
                    n - 3
                })
            })
            .collect();
        DofMap {
            n_solid_nodes,
            fluid_base,
            n,
            dirichlet: vec![false; n],
        }
    }

    #[inline]
    pub fn solid(&self, node: usize, c: usize) -> usize {
        2 * node + c
    }

    pub fn field(&self, i: usize) -> Field {
        if i < 2 * self.n_solid_nodes {
            Field::Solid
        } else if (i - 2 * self.n_solid_nodes) % 3 == 2 {
            Field::Continuity
        } else {
            Field::Momentum
        }
    }
}

/// Solves `K x = b` with a sparse LU factorization.
pub fn sparse_solve(n: usize, trip: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    faer::set_global_parallelism(faer::Parallelism::None);
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, trip)
        .map_err(|e| Error::LinearSolve(format!("matrix assembly: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("factorization: {e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(n, |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x.read(i)).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("singular or ill-conditioned system".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_system() {
        let trip = vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0), (1, 1, 2.0)];
        let x = sparse_solve(2, &trip, &[3.0, 4.0]).unwrap();
        assert!((2.0 * x[0] + x[1] - 3.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 4.0).abs() < 1e-14);
    }
}
