//! Nested Chebyshev bases shared by every cell of a level.
//!
//! On a uniform tree the node-to-node kernel blocks depend only on the level
//! and the cell offset, so one orthonormal basis per level serves all cells.
//! Each level's basis is the dominant left singular subspace of all its
//! far-field kernel blocks together with the parent basis restricted to the
//! four child positions, which makes the bases nested.

use std::collections::HashMap;

use ndarray::{s, Array2};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::chebyshev::Chebyshev;
use crate::error::Result;
use crate::kernel::{stokeslet, SLP_SCALE};
use crate::tree::QuadTree;

#[derive(Debug, Clone)]
pub struct LevelBasis {
    /// Orthonormal columns over node degrees of freedom `2k + component`.
    pub q: Array2<f64>,
    pub sigma: Vec<f64>,
    /// Compressed node interactions keyed by source-minus-target cell offset.
    pub couplings: HashMap<(i32, i32), Array2<f64>>,
    /// `Q_l^T T_q Q_{l-1}` for child position `q`; absent on the coarsest level.
    pub transfer: Option<[Array2<f64>; 4]>,
}

impl LevelBasis {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct NestedBasis {
    pub cheb: Chebyshev,
    pub tol: f64,
    /// Indexed by tree level; `None` on levels 0 and 1.
    pub levels: Vec<Option<LevelBasis>>,
}

pub fn far_offsets() -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for dy in -3..=3i32 {
        for dx in -3..=3i32 {
            if dx.abs().max(dy.abs()) >= 2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Raw kernel between Chebyshev nodes of a target cell at the origin and a
/// source cell shifted by `offset` cells, both of half-width `w`.
fn node_kernel(cheb: &Chebyshev, w: f64, offset: (i32, i32)) -> Array2<f64> {
    let nodes = cheb.nodes_2d();
    let m = nodes.len();
    let shift = [2.0 * w * offset.0 as f64, 2.0 * w * offset.1 as f64];
    let mut k = Array2::zeros((2 * m, 2 * m));
    for (a, ta) in nodes.iter().enumerate() {
        let x = [w * ta[0], w * ta[1]];
        for (b, sb) in nodes.iter().enumerate() {
            let y = [shift[0] + w * sb[0], shift[1] + w * sb[1]];
            let g = stokeslet(x, y);
            k[[2 * a, 2 * b]] = g[0];
            k[[2 * a, 2 * b + 1]] = g[1];
            k[[2 * a + 1, 2 * b]] = g[2];
            k[[2 * a + 1, 2 * b + 1]] = g[3];
        }
    }
    k
}

/// Interpolation from parent nodes to the nodes of child `q`, expanded over components.
pub fn child_transfer(cheb: &Chebyshev, q: usize) -> Array2<f64> {
    let (qx, qy) = ((q & 1) as f64, (q >> 1) as f64);
    let refs = cheb
        .nodes_2d()
        .into_iter()
        .map(|p| [qx - 0.5 + 0.5 * p[0], qy - 0.5 + 0.5 * p[1]])
        .collect::<Vec<_>>();
    let phi = cheb.interpolation_matrix(refs.into_iter());
    expand_components(&phi)
}

/// `phi ⊗ I_2` with rows and columns interleaved by component.
pub fn expand_components(phi: &Array2<f64>) -> Array2<f64> {
    let (r, c) = phi.dim();
    let mut out = Array2::zeros((2 * r, 2 * c));
    for i in 0..r {
        for j in 0..c {
            out[[2 * i, 2 * j]] = phi[[i, j]];
            out[[2 * i + 1, 2 * j + 1]] = phi[[i, j]];
        }
    }
    out
}

impl NestedBasis {
    /// Builds bases for levels `2..=depth`, truncating at `tol` relative to the
    /// largest singular value of each level.
    pub fn new(tree: &QuadTree, n: usize, tol: f64) -> Result<Self> {
        let cheb = Chebyshev::new(n);
        let offsets = far_offsets();
        let transfers: Vec<Array2<f64>> = (0..4).map(|q| child_transfer(&cheb, q)).collect();
        let m = 2 * n * n;
        let mut levels: Vec<Option<LevelBasis>> = vec![None; tree.depth + 1];
        for l in 2..=tree.depth {
            let w = tree.half_width(l);
            let kernels: Vec<Array2<f64>> = offsets.iter().map(|&o| node_kernel(&cheb, w, o)).collect();
            let parent = levels[l - 1].as_ref();
            let extra = parent.map_or(0, |p| 4 * p.rank());
            let mut fat = Array2::zeros((m, kernels.len() * m + extra));
            for (k, mat) in kernels.iter().enumerate() {
                fat.slice_mut(s![.., k * m..(k + 1) * m]).assign(mat);
            }
            if let Some(p) = parent {
                let mut scaled = p.q.clone();
                for (j, sv) in p.sigma.iter().enumerate() {
                    scaled.column_mut(j).mapv_inplace(|v| v * sv);
                }
                let base = kernels.len() * m;
                for (q, t) in transfers.iter().enumerate() {
                    fat.slice_mut(s![.., base + q * p.rank()..base + (q + 1) * p.rank()])
                        .assign(&t.dot(&scaled));
                }
            }
            let (u, sv, _) = fat.svddc(JobSvd::Some)?;
            let u = u.expect("left singular vectors");
            let cutoff = tol * sv[0];
            let rank = sv.iter().take_while(|&&v| v > cutoff).count().max(1);
            let q = u.slice(s![.., ..rank]).to_owned();
            let couplings = offsets
                .iter()
                .zip(&kernels)
                .map(|(&o, k)| (o, q.t().dot(k).dot(&q) * SLP_SCALE))
                .collect();
            let transfer = parent.map(|p| {
                let e: Vec<Array2<f64>> = transfers.iter().map(|t| q.t().dot(&t.dot(&p.q))).collect();
                let [e0, e1, e2, e3]: [Array2<f64>; 4] = e.try_into().expect("four quadrants");
                [e0, e1, e2, e3]
            });
            levels[l] = Some(LevelBasis {
                q,
                sigma: sv.iter().take(rank).copied().collect(),
                couplings,
                transfer,
            });
        }
        Ok(Self { cheb, tol, levels })
    }

    pub fn level(&self, l: usize) -> Option<&LevelBasis> {
        self.levels.get(l).and_then(Option::as_ref)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.levels.iter().map(|b| b.as_ref().map_or(0, LevelBasis::rank)).collect()
    }
}
