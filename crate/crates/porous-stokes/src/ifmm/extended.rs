//! Extended sparse system obtained by introducing multipole coefficients
//! `y = V^T sigma` and local coefficients `z` on every level.

use ndarray::{s, Array1, Array2, ArrayView1};
use ndarray_linalg::Solve;

use super::H2Matrix;
use crate::error::{Error, Result};

/// Guard on the dense assembly used for verification.
const DENSE_LIMIT: usize = 12000;

#[derive(Debug, Clone)]
pub struct ExtendedSystem {
    h2: H2Matrix,
}

impl ExtendedSystem {
    pub fn new(h2: H2Matrix) -> Self {
        Self { h2 }
    }

    pub fn h2(&self) -> &H2Matrix {
        &self.h2
    }

    pub fn into_h2(self) -> H2Matrix {
        self.h2
    }

    /// Auxiliary unknowns per level (`z` and `y` together), before any
    /// fill-in, with each cell's rank capped by its own dimension.
    pub fn aux_dims(&self) -> Vec<usize> {
        let tree = &self.h2.tree;
        let depth = tree.depth;
        let mut out = vec![0; depth + 1];
        if depth < 2 {
            return out;
        }
        let mut dims: Vec<usize> = tree.leaves().iter().map(|c| 2 * c.len()).collect();
        for l in (2..=depth).rev() {
            let r = self.h2.basis.level(l).expect("basis").rank();
            let k: Vec<usize> = dims.iter().map(|&p| p.min(r)).collect();
            out[l] = 2 * k.iter().sum::<usize>();
            dims = tree.levels[l - 1].cells.iter().map(|p| p.children.iter().map(|&c| k[c]).sum()).collect();
        }
        out
    }

    pub fn aux_ratio(&self) -> f64 {
        self.aux_dims().iter().sum::<usize>() as f64 / self.h2.dim() as f64
    }

    /// Size of the uncompressed extended system: `2N` plus `2 r_l` per cell.
    pub fn full_dim(&self) -> usize {
        let tree = &self.h2.tree;
        self.h2.dim()
            + (2..=tree.depth)
                .map(|l| 2 * self.h2.basis.level(l).expect("basis").rank() * tree.levels[l].cells.len())
                .sum::<usize>()
    }

    /// Dense extended matrix with unknowns ordered
    /// `(sigma; z^(L), y^(L); ...; z^(2), y^(2))`, `sigma` in leaf order.
    pub fn assemble_dense(&self) -> Result<Array2<f64>> {
        let h2 = &self.h2;
        let tree = &h2.tree;
        let depth = tree.depth;
        let dim = self.full_dim();
        if dim > DENSE_LIMIT {
            return Err(Error::SizeGuard(dim, DENSE_LIMIT));
        }
        let mut a = Array2::zeros((dim, dim));
        let mut leaf_off = vec![0usize; tree.leaves().len() + 1];
        for (k, c) in tree.leaves().iter().enumerate() {
            leaf_off[k + 1] = leaf_off[k] + 2 * c.len();
        }
        for (c, row) in h2.near.iter().enumerate() {
            for (d, m) in row {
                a.slice_mut(s![leaf_off[c]..leaf_off[c + 1], leaf_off[*d]..leaf_off[d + 1]]).assign(m);
            }
        }
        if depth < 2 {
            return Ok(a);
        }
        // Offsets of z and y blocks per level.
        let mut zoff = vec![Vec::new(); depth + 1];
        let mut yoff = vec![Vec::new(); depth + 1];
        let mut next = h2.dim();
        for l in (2..=depth).rev() {
            let r = h2.basis.level(l).expect("basis").rank();
            let n = tree.levels[l].cells.len();
            zoff[l] = (0..n).map(|c| next + c * r).collect();
            yoff[l] = (0..n).map(|c| next + (n + c) * r).collect();
            next += 2 * n * r;
        }
        for l in (2..=depth).rev() {
            let b = h2.basis.level(l).expect("basis");
            let r = b.rank();
            let cells = &tree.levels[l].cells;
            let eye = Array2::<f64>::eye(r);
            for (c, cell) in cells.iter().enumerate() {
                let (z, y) = (zoff[l][c], yoff[l][c]);
                a.slice_mut(s![y..y + r, z..z + r]).assign(&(-&eye));
                a.slice_mut(s![z..z + r, y..y + r]).assign(&(-&eye));
                for &d in &cell.interactions {
                    let yd = yoff[l][d];
                    a.slice_mut(s![y..y + r, yd..yd + r]).assign(&b.couplings[&cell.offset_to(&cells[d])]);
                }
                if l == depth {
                    let rows = leaf_off[c]..leaf_off[c + 1];
                    a.slice_mut(s![rows.clone(), z..z + r]).assign(&h2.leaf_u[c]);
                    a.slice_mut(s![z..z + r, rows]).assign(&h2.leaf_v[c].t());
                } else {
                    let kids = &tree.levels[l + 1].cells;
                    let rk = h2.basis.level(l + 1).expect("basis").rank();
                    let e = h2.basis.level(l + 1).and_then(|b| b.transfer.as_ref()).expect("transfer");
                    for &k in &cell.children {
                        let yk = yoff[l + 1][k];
                        let q = kids[k].quadrant();
                        a.slice_mut(s![z..z + r, yk..yk + rk]).assign(&e[q].t());
                        a.slice_mut(s![yk..yk + rk, z..z + r]).assign(&e[q]);
                    }
                }
            }
        }
        Ok(a)
    }

    /// Solves the extended system densely and returns `sigma` in point order.
    pub fn solve_dense(&self, f: &[f64]) -> Result<Vec<f64>> {
        let a = self.assemble_dense()?;
        let mut rhs = Array1::zeros(a.nrows());
        let parts = self.h2.gather(f);
        let mut off = 0;
        for p in &parts {
            rhs.slice_mut(s![off..off + p.len()]).assign(p);
            off += p.len();
        }
        let x = a.solve_into(rhs)?;
        let mut sig = Vec::with_capacity(parts.len());
        let mut off = 0;
        for p in &parts {
            sig.push(x.slice(s![off..off + p.len()]).to_owned());
            off += p.len();
        }
        let mut out = vec![0.0; f.len()];
        self.h2.scatter(&sig, &mut out);
        Ok(out)
    }

    /// `A_H` as a dense matrix in point order, column by column.
    pub fn h2_dense(&self) -> Array2<f64> {
        use crate::operator::LinearOperator;
        let n = self.h2.dim();
        let mut a = Array2::zeros((n, n));
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.h2.apply_into(&e, &mut y);
            a.column_mut(j).assign(&ArrayView1::from(&y[..]));
            e[j] = 0.0;
        }
        a
    }
}
