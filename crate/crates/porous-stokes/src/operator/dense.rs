use ndarray::{Array2, ArrayView1};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::geometry::BoundaryDiscretization;
use crate::kernel::{stokeslet, SLP_SCALE};
use crate::quadrature::KR6_GAMMA;

/// Largest number of unknowns the dense operator will allocate by default.
pub const DENSE_GUARD: usize = 32768;

/// Quadrature weight `w_j` in row `i`: zero on the diagonal, Kapur-Rokhlin
/// corrected on the twelve same-curve neighbors, `ds_j` elsewhere.
#[inline]
pub fn quadrature_weight(disc: &BoundaryDiscretization, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let b = disc.body_of[i];
    if b != disc.body_of[j] {
        return disc.ds[j];
    }
    let n = disc.bodies[b].len();
    let d = (j + n - i) % n;
    let l = d.min(n - d);
    if l <= 6 {
        disc.ds[j] * (1.0 + KR6_GAMMA[l - 1])
    } else {
        disc.ds[j]
    }
}

/// Dense sub-matrix of `A` for the given point rows and columns.
pub fn assemble_block(disc: &BoundaryDiscretization, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((2 * rows.len(), 2 * cols.len()));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let w = quadrature_weight(disc, i, j);
            if w == 0.0 {
                continue;
            }
            let g = stokeslet(disc.points[i], disc.points[j]);
            let s = SLP_SCALE * w;
            out[[2 * a, 2 * b]] = s * g[0];
            out[[2 * a, 2 * b + 1]] = s * g[1];
            out[[2 * a + 1, 2 * b]] = s * g[2];
            out[[2 * a + 1, 2 * b + 1]] = s * g[3];
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: Array2<f64>,
}

pub fn assemble_dense(disc: &BoundaryDiscretization) -> Result<DenseOperator> {
    assemble_dense_with_guard(disc, DENSE_GUARD)
}

pub fn assemble_dense_with_guard(disc: &BoundaryDiscretization, guard: usize) -> Result<DenseOperator> {
    let dim = disc.unknowns();
    if dim > guard {
        return Err(Error::SizeGuard(dim, guard));
    }
    let all: Vec<usize> = (0..disc.len()).collect();
    Ok(DenseOperator { matrix: assemble_block(disc, &all, &all) })
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let r = self.matrix.dot(&ArrayView1::from(x));
        y.copy_from_slice(r.as_slice().expect("contiguous"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_wrap_periodically() {
        let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 32).unwrap();
        let h = disc.ds[0];
        assert_eq!(quadrature_weight(&disc, 3, 3), 0.0);
        assert!((quadrature_weight(&disc, 0, 31) - h * (1.0 + KR6_GAMMA[0])).abs() < 1e-15);
        assert!((quadrature_weight(&disc, 1, 27) - h * (1.0 + KR6_GAMMA[5])).abs() < 1e-15);
        assert_eq!(quadrature_weight(&disc, 1, 26), h);
    }

    #[test]
    fn guard_refuses_large_systems() {
        let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 64).unwrap();
        assert!(matches!(assemble_dense_with_guard(&disc, 100), Err(Error::SizeGuard(128, 100))));
    }
}
