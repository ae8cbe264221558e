//! Black-box (Chebyshev) fast multipole method for the single-layer kernel.
//!
//! `PointFmm` evaluates `u_i = 1/(4 pi) sum_{j != i} w_j G(x_i, x_j) s_j` for
//! arbitrary weights, which serves both the smooth trapezoid part of the
//! operator and off-surface evaluation (targets carry zero weight).
//! Reductions run sequentially in Morton cell order, so results are
//! bit-reproducible.

use ndarray::{Array1, Array2, ArrayView2};

use super::basis::NestedBasis;
use super::LinearOperator;
use crate::error::Result;
use crate::geometry::{BoundaryDiscretization, Point};
use crate::kernel::{stokeslet, KernelBlock, SLP_SCALE};
use crate::quadrature::stencil;
use crate::tree::{DepthRule, QuadTree};

#[derive(Debug, Clone, PartialEq)]
pub struct FmmOptions {
    pub n: usize,
    pub levels: Option<usize>,
    /// SVD truncation of the level bases, relative.
    pub basis_tol: f64,
    /// Depth rule: mean leaf population at most `leaf_factor * n^2`.
    pub leaf_factor: f64,
    /// Near-field blocks are stored when they fit in this many bytes.
    pub near_cache_bytes: usize,
}

impl Default for FmmOptions {
    fn default() -> Self {
        Self { n: 10, levels: None, basis_tol: 1e-14, leaf_factor: 1.0, near_cache_bytes: 1 << 29 }
    }
}

impl FmmOptions {
    pub fn depth_rule(&self) -> DepthRule {
        match self.levels {
            Some(d) => DepthRule::Fixed(d),
            None => DepthRule::MeanLeaf(self.leaf_factor * (self.n * self.n) as f64),
        }
    }
}

#[derive(Debug, Clone)]
struct NearField {
    /// Source point indices gathered over each leaf's neighbors.
    sources: Vec<Vec<usize>>,
    blocks: Option<Vec<Array2<f64>>>,
}

#[derive(Debug, Clone)]
pub struct PointFmm {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub tree: QuadTree,
    pub basis: NestedBasis,
    leaf_phi: Vec<Array2<f64>>,
    near: NearField,
}

impl PointFmm {
    pub fn new(points: Vec<Point>, weights: Vec<f64>, opts: &FmmOptions) -> Result<Self> {
        assert_eq!(points.len(), weights.len());
        let tree = QuadTree::new(&points, opts.depth_rule())?;
        let basis = NestedBasis::new(&tree, opts.n, opts.basis_tol)?;
        let depth = tree.depth;
        let w = tree.half_width(depth);
        let leaf_phi = tree
            .leaves()
            .iter()
            .map(|c| {
                let ctr = tree.center(depth, c);
                let refs = tree.points_of(c).iter().map(|&i| {
                    let p = points[i];
                    [(p[0] - ctr[0]) / w, (p[1] - ctr[1]) / w]
                });
                basis.cheb.interpolation_matrix(refs.collect::<Vec<_>>().into_iter())
            })
            .collect();
        let sources: Vec<Vec<usize>> = tree
            .leaves()
            .iter()
            .map(|c| {
                c.neighbors
                    .iter()
                    .flat_map(|&d| tree.points_of(&tree.leaves()[d]).iter().copied())
                    .filter(|&j| weights[j] != 0.0)
                    .collect()
            })
            .collect();
        let bytes: usize = tree
            .leaves()
            .iter()
            .zip(&sources)
            .map(|(c, s)| 32 * c.len() * s.len())
            .sum();
        let mut fmm = Self {
            points,
            weights,
            tree,
            basis,
            leaf_phi,
            near: NearField { sources, blocks: None },
        };
        if bytes <= opts.near_cache_bytes {
            let blocks = (0..fmm.tree.leaves().len()).map(|k| fmm.near_block(k)).collect();
            fmm.near.blocks = Some(blocks);
        }
        Ok(fmm)
    }

    fn near_block(&self, leaf: usize) -> Array2<f64> {
        let targets = self.tree.points_of(&self.tree.leaves()[leaf]);
        let sources = &self.near.sources[leaf];
        let mut out = Array2::zeros((2 * targets.len(), 2 * sources.len()));
        for (a, &i) in targets.iter().enumerate() {
            for (b, &j) in sources.iter().enumerate() {
                if i == j {
                    continue;
                }
                let g = stokeslet(self.points[i], self.points[j]);
                let s = SLP_SCALE * self.weights[j];
                out[[2 * a, 2 * b]] = s * g[0];
                out[[2 * a, 2 * b + 1]] = s * g[1];
                out[[2 * a + 1, 2 * b]] = s * g[2];
                out[[2 * a + 1, 2 * b + 1]] = s * g[3];
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn near_cached(&self) -> bool {
        self.near.blocks.is_some()
    }

    /// Adjacent-leaf interactions, evaluated directly.
    pub fn apply_near(&self, density: &[f64], out: &mut [f64]) {
        for (k, c) in self.tree.leaves().iter().enumerate() {
            let targets = self.tree.points_of(c);
            let sources = &self.near.sources[k];
            if let Some(blocks) = &self.near.blocks {
                let mut x = Array1::zeros(2 * sources.len());
                for (b, &j) in sources.iter().enumerate() {
                    x[2 * b] = density[2 * j];
                    x[2 * b + 1] = density[2 * j + 1];
                }
                let y = blocks[k].dot(&x);
                for (a, &i) in targets.iter().enumerate() {
                    out[2 * i] += y[2 * a];
                    out[2 * i + 1] += y[2 * a + 1];
                }
                continue;
            }
            for &i in targets {
                let x = self.points[i];
                let (mut u0, mut u1) = (0.0, 0.0);
                for &j in sources {
                    if i == j {
                        continue;
                    }
                    let g = stokeslet(x, self.points[j]);
                    let s = self.weights[j];
                    let (a, b) = (s * density[2 * j], s * density[2 * j + 1]);
                    u0 += g[0] * a + g[1] * b;
                    u1 += g[2] * a + g[3] * b;
                }
                out[2 * i] += SLP_SCALE * u0;
                out[2 * i + 1] += SLP_SCALE * u1;
            }
        }
    }

    /// Well-separated interactions through the nested Chebyshev bases.
    pub fn apply_far(&self, density: &[f64], out: &mut [f64]) {
        let depth = self.tree.depth;
        if depth < 2 {
            return;
        }
        let leaf_basis = self.basis.level(depth).expect("leaf basis");
        let nn = self.basis.cheb.n * self.basis.cheb.n;
        let mut up: Vec<Vec<Array1<f64>>> = vec![Vec::new(); depth + 1];
        up[depth] = self
            .tree
            .leaves()
            .iter()
            .zip(&self.leaf_phi)
            .map(|(c, phi)| {
                let idx = self.tree.points_of(c);
                let mut psi = Array2::zeros((idx.len(), 2));
                for (a, &j) in idx.iter().enumerate() {
                    psi[[a, 0]] = self.weights[j] * density[2 * j];
                    psi[[a, 1]] = self.weights[j] * density[2 * j + 1];
                }
                let m = phi.t().dot(&psi);
                let m = Array1::from_iter(m.iter().copied());
                leaf_basis.q.t().dot(&m)
            })
            .collect();
        for l in (2..depth).rev() {
            let child = self.basis.level(l + 1).expect("basis");
            let rank = self.basis.level(l).expect("basis").rank();
            let e = child.transfer.as_ref().expect("transfer");
            let cells = &self.tree.levels[l].cells;
            let children = &self.tree.levels[l + 1].cells;
            up[l] = cells
                .iter()
                .map(|c| {
                    let mut y = Array1::zeros(rank);
                    for &k in &c.children {
                        y += &e[children[k].quadrant()].t().dot(&up[l + 1][k]);
                    }
                    y
                })
                .collect();
        }
        let mut down: Vec<Vec<Array1<f64>>> = vec![Vec::new(); depth + 1];
        for l in 2..=depth {
            let basis = self.basis.level(l).expect("basis");
            let cells = &self.tree.levels[l].cells;
            down[l] = cells
                .iter()
                .map(|c| {
                    let mut z = Array1::zeros(basis.rank());
                    for &d in &c.interactions {
                        let off = c.offset_to(&cells[d]);
                        z += &basis.couplings[&off].dot(&up[l][d]);
                    }
                    if l > 2 {
                        let p = c.parent.expect("parent");
                        let e = &basis.transfer.as_ref().expect("transfer")[c.quadrant()];
                        z += &e.dot(&down[l - 1][p]);
                    }
                    z
                })
                .collect();
        }
        for ((c, phi), z) in self.tree.leaves().iter().zip(&self.leaf_phi).zip(&down[depth]) {
            let v = leaf_basis.q.dot(z);
            let v = ArrayView2::from_shape((nn, 2), v.as_slice().expect("contiguous")).expect("shape");
            let u = phi.dot(&v);
            for (a, &i) in self.tree.points_of(c).iter().enumerate() {
                out[2 * i] += u[[a, 0]];
                out[2 * i + 1] += u[[a, 1]];
            }
        }
    }

    pub fn evaluate(&self, density: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; density.len()];
        self.apply_far(density, &mut out);
        self.apply_near(density, &mut out);
        out
    }
}

/// Sparse Kapur-Rokhlin correction part of `A`.
#[derive(Debug, Clone)]
pub struct CorrectionMatrix {
    pub rows: Vec<Vec<(usize, KernelBlock)>>,
}

impl CorrectionMatrix {
    pub fn new(disc: &BoundaryDiscretization) -> Self {
        let rows = (0..disc.len())
            .map(|i| {
                stencil(disc, i)
                    .map(|(j, w)| {
                        let g = stokeslet(disc.points[i], disc.points[j]);
                        let s = SLP_SCALE * w;
                        (j, [s * g[0], s * g[1], s * g[2], s * g[3]])
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn nonzeros_per_row(&self) -> usize {
        self.rows.iter().map(|r| 2 * r.len()).max().unwrap_or(0)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, g) in row {
                a += g[0] * x[2 * j] + g[1] * x[2 * j + 1];
                b += g[2] * x[2 * j] + g[3] * x[2 * j + 1];
            }
            y[2 * i] += a;
            y[2 * i + 1] += b;
        }
    }
}

/// FMM-accelerated `A`: smooth trapezoid part through the FMM plus the local corrections.
#[derive(Debug, Clone)]
pub struct FmmOperator {
    pub fmm: PointFmm,
    pub correction: CorrectionMatrix,
    pub n: usize,
}

impl FmmOperator {
    pub fn new(disc: &BoundaryDiscretization, opts: &FmmOptions) -> Result<Self> {
        let fmm = PointFmm::new(disc.points.clone(), disc.ds.clone(), opts)?;
        Ok(Self { fmm, correction: CorrectionMatrix::new(disc), n: opts.n })
    }

    pub fn depth(&self) -> usize {
        self.fmm.tree.depth
    }
}

impl LinearOperator for FmmOperator {
    fn dim(&self) -> usize {
        2 * self.fmm.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.fmm.apply_far(x, y);
        self.fmm.apply_near(x, y);
        self.correction.apply(x, y);
    }
}
