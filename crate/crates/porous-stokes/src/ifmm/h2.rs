//! H2 representation of `A`: stored near-field blocks plus nested
//! Chebyshev bases for the well-separated part.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::geometry::BoundaryDiscretization;
use crate::operator::basis::expand_components;
use crate::operator::{assemble_block, LinearOperator, NestedBasis};
use crate::quadrature::stencil;
use crate::tree::{DepthRule, QuadTree};

#[derive(Debug, Clone)]
pub struct H2Matrix {
    pub tree: QuadTree,
    pub basis: NestedBasis,
    /// `(Phi_c ⊗ I) Q_L` per leaf, rows in tree point order.
    pub leaf_u: Vec<Array2<f64>>,
    /// `W_c (Phi_c ⊗ I) Q_L` per leaf with `W_c` the element lengths.
    pub leaf_v: Vec<Array2<f64>>,
    /// Near-field blocks `(neighbor leaf, S_cd)` per leaf, quadrature corrections included.
    pub near: Vec<Vec<(usize, Array2<f64>)>>,
    pub eps_build: f64,
}

impl H2Matrix {
    pub fn new(disc: &BoundaryDiscretization, n: usize, eps_build: f64, depth: DepthRule) -> Result<Self> {
        let tree = QuadTree::new(&disc.points, depth)?;
        let tol = eps_build.max(1e-15);
        let basis = NestedBasis::new(&tree, n, tol)?;
        let d = tree.depth;
        let leaf_of = {
            let mut v = vec![0usize; disc.len()];
            for (k, c) in tree.leaves().iter().enumerate() {
                for &i in tree.points_of(c) {
                    v[i] = k;
                }
            }
            v
        };
        for i in 0..disc.len() {
            for (j, _) in stencil(disc, i) {
                let (a, b) = (&tree.leaves()[leaf_of[i]], &tree.leaves()[leaf_of[j]]);
                if !a.adjacent(b) {
                    return Err(Error::CorrectionOutsideNearField(i, j));
                }
            }
        }
        let (mut leaf_u, mut leaf_v) = (Vec::new(), Vec::new());
        if let Some(lb) = basis.level(d) {
            let w = tree.half_width(d);
            for c in tree.leaves() {
                let ctr = tree.center(d, c);
                let idx = tree.points_of(c);
                let refs: Vec<[f64; 2]> = idx
                    .iter()
                    .map(|&i| [(disc.points[i][0] - ctr[0]) / w, (disc.points[i][1] - ctr[1]) / w])
                    .collect();
                let phi = expand_components(&basis.cheb.interpolation_matrix(refs.into_iter()));
                let u = phi.dot(&lb.q);
                let mut v = u.clone();
                for (a, &i) in idx.iter().enumerate() {
                    v.row_mut(2 * a).mapv_inplace(|x| x * disc.ds[i]);
                    v.row_mut(2 * a + 1).mapv_inplace(|x| x * disc.ds[i]);
                }
                leaf_u.push(u);
                leaf_v.push(v);
            }
        }
        let near = tree
            .leaves()
            .iter()
            .map(|c| {
                c.neighbors
                    .iter()
                    .map(|&k| (k, assemble_block(disc, tree.points_of(c), tree.points_of(&tree.leaves()[k]))))
                    .collect()
            })
            .collect();
        Ok(Self { tree, basis, leaf_u, leaf_v, near, eps_build })
    }

    pub fn dim(&self) -> usize {
        2 * self.tree.order.len()
    }

    /// Gathers `x` (point order) into per-leaf vectors.
    pub fn gather(&self, x: &[f64]) -> Vec<Array1<f64>> {
        self.tree
            .leaves()
            .iter()
            .map(|c| {
                let idx = self.tree.points_of(c);
                let mut v = Array1::zeros(2 * idx.len());
                for (a, &i) in idx.iter().enumerate() {
                    v[2 * a] = x[2 * i];
                    v[2 * a + 1] = x[2 * i + 1];
                }
                v
            })
            .collect()
    }

    pub fn scatter(&self, parts: &[Array1<f64>], out: &mut [f64]) {
        for (c, v) in self.tree.leaves().iter().zip(parts) {
            for (a, &i) in self.tree.points_of(c).iter().enumerate() {
                out[2 * i] = v[2 * a];
                out[2 * i + 1] = v[2 * a + 1];
            }
        }
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.basis.ranks()
    }
}

impl LinearOperator for H2Matrix {
    fn dim(&self) -> usize {
        H2Matrix::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let xs = self.gather(x);
        let mut ys: Vec<Array1<f64>> = xs.iter().map(|v| Array1::zeros(v.len())).collect();
        for (c, row) in self.near.iter().enumerate() {
            for (d, s) in row {
                ys[c] += &s.dot(&xs[*d]);
            }
        }
        let depth = self.tree.depth;
        if depth >= 2 {
            let mut up: Vec<Vec<Array1<f64>>> = vec![Vec::new(); depth + 1];
            up[depth] = self.leaf_v.iter().zip(&xs).map(|(v, x)| v.t().dot(x)).collect();
            for l in (2..depth).rev() {
                let e = self.basis.level(l + 1).and_then(|b| b.transfer.as_ref()).expect("transfer");
                let rank = self.basis.level(l).expect("basis").rank();
                let children = &self.tree.levels[l + 1].cells;
                up[l] = self.tree.levels[l]
                    .cells
                    .iter()
                    .map(|c| {
                        let mut acc = Array1::zeros(rank);
                        for &k in &c.children {
                            acc += &e[children[k].quadrant()].t().dot(&up[l + 1][k]);
                        }
                        acc
                    })
                    .collect();
            }
            let mut down: Vec<Vec<Array1<f64>>> = vec![Vec::new(); depth + 1];
            for l in 2..=depth {
                let b = self.basis.level(l).expect("basis");
                let cells = &self.tree.levels[l].cells;
                down[l] = cells
                    .iter()
                    .map(|c| {
                        let mut z = Array1::zeros(b.rank());
                        for &d in &c.interactions {
                            z += &b.couplings[&c.offset_to(&cells[d])].dot(&up[l][d]);
                        }
                        if l > 2 {
                            let e = &b.transfer.as_ref().expect("transfer")[c.quadrant()];
                            z += &e.dot(&down[l - 1][c.parent.expect("parent")]);
                        }
                        z
                    })
                    .collect();
            }
            for (c, u) in self.leaf_u.iter().enumerate() {
                ys[c] += &u.dot(&down[depth][c]);
            }
        }
        self.scatter(&ys, y);
    }
}
