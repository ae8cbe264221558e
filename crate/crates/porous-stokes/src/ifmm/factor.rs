//! Block elimination of the extended system with compression of
//! well-separated fill-ins.
//!
//! Each level holds, per cell `c`, three unknown groups:
//! `X(c)` (density, or the children's multipole coefficients on coarser
//! levels), `Z(c)` (local coefficients) and `Y(c)` (multipole coefficients).
//! The equation attached to `X(c)` is the cell's row of `S x + U z = f`, the
//! one attached to `Z(c)` reads `V^T x - y = 0` and the one attached to `Y(c)`
//! reads `-z + sum_d C y_d + E z_parent = 0`. The pivot of cell `c` is the
//! pair `{X(c), Z(c)}`; after every level only the `Y` unknowns remain and
//! they form the next level's `X` unknowns.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use ndarray_linalg::{Factorize, Inverse, JobSvd, Norm, ReciprocalConditionNum, SVDDC};
use serde::{Deserialize, Serialize};

use super::extended::ExtendedSystem;
use super::H2Matrix;
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::tree::QuadTree;

type Mat = Array2<f64>;

/// Condition threshold beyond which a pivot is shifted.
const RCOND_MIN: f64 = 1e-12;
const SHIFT: f64 = 1e-14;
/// Relative cutoff used when no truncation is requested.
const EXACT_CUTOFF: f64 = 1e-15;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
enum Node {
    X(usize),
    Z(usize),
    Y(usize),
}

impl Node {
    fn cell(self) -> usize {
        match self {
            Node::X(c) | Node::Z(c) | Node::Y(c) => c,
        }
    }
}

#[derive(Default)]
struct BlockStore {
    blocks: HashMap<(Node, Node), Mat>,
    rows: HashMap<Node, BTreeSet<Node>>,
    cols: HashMap<Node, BTreeSet<Node>>,
}

impl BlockStore {
    fn get(&self, r: Node, c: Node) -> Option<&Mat> {
        self.blocks.get(&(r, c))
    }

    fn insert(&mut self, r: Node, c: Node, m: Mat) {
        self.rows.entry(r).or_default().insert(c);
        self.cols.entry(c).or_default().insert(r);
        self.blocks.insert((r, c), m);
    }

    fn add(&mut self, r: Node, c: Node, m: Mat) {
        match self.blocks.get_mut(&(r, c)) {
            Some(b) => *b += &m,
            None => self.insert(r, c, m),
        }
    }

    fn remove(&mut self, r: Node, c: Node) -> Option<Mat> {
        let m = self.blocks.remove(&(r, c))?;
        if let Some(s) = self.rows.get_mut(&r) {
            s.remove(&c);
        }
        if let Some(s) = self.cols.get_mut(&c) {
            s.remove(&r);
        }
        Some(m)
    }

    fn row(&self, r: Node) -> Vec<Node> {
        self.rows.get(&r).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn col(&self, c: Node) -> Vec<Node> {
        self.cols.get(&c).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn map_row(&mut self, r: Node, f: impl Fn(&Mat) -> Mat) {
        for c in self.row(r) {
            if let Some(b) = self.blocks.get_mut(&(r, c)) {
                *b = f(b);
            }
        }
    }

    fn map_col(&mut self, c: Node, f: impl Fn(&Mat) -> Mat) {
        for r in self.col(c) {
            if let Some(b) = self.blocks.get_mut(&(r, c)) {
                *b = f(b);
            }
        }
    }

    fn bytes(&self) -> usize {
        self.blocks.values().map(|b| 8 * b.len()).sum()
    }
}

fn pad_rows(m: &Mat, k: usize) -> Mat {
    let mut out = Mat::zeros((m.nrows() + k, m.ncols()));
    out.slice_mut(s![..m.nrows(), ..]).assign(m);
    out
}

fn pad_cols(m: &Mat, k: usize) -> Mat {
    let mut out = Mat::zeros((m.nrows(), m.ncols() + k));
    out.slice_mut(s![.., ..m.ncols()]).assign(m);
    out
}

fn neg_eye(n: usize) -> Mat {
    -Mat::eye(n)
}

/// Singular values above `cutoff * s_max`, with left factors scaled by them.
fn truncated(f: &Mat, cutoff: f64) -> Result<Option<(Mat, Mat)>> {
    let (u, sv, vt) = f.svddc(JobSvd::Some)?;
    let (u, vt) = (u.expect("left factors"), vt.expect("right factors"));
    if sv.is_empty() || sv[0] == 0.0 {
        return Ok(None);
    }
    let k = sv.iter().take_while(|&&v| v > cutoff * sv[0]).count();
    let mut left = u.slice(s![.., ..k]).to_owned();
    let mut right = vt.slice(s![..k, ..]).t().to_owned();
    for j in 0..k {
        left.column_mut(j).mapv_inplace(|x| x * sv[j]);
        right.column_mut(j).mapv_inplace(|x| x * sv[j]);
    }
    Ok(Some((left, right)))
}

/// Relative size below which a projected residual is roundoff.
const PROJECTION_NOISE: f64 = 1e-13;

fn project_out(basis: &Mat, w: &Mat) -> Mat {
    let w = w - &basis.dot(&basis.t().dot(w));
    &w - &basis.dot(&basis.t().dot(&w))
}

fn max_column_norm(m: &Mat) -> f64 {
    m.columns().into_iter().map(|c| c.dot(&c).sqrt()).fold(0.0, f64::max)
}

/// Orthonormal directions of `cand` outside the span of the orthonormal
/// `basis`, kept above `cutoff` relative to the largest candidate column.
fn complement(basis: &Mat, cand: &Mat, cutoff: f64) -> Result<Mat> {
    let scale = max_column_norm(cand);
    if scale == 0.0 || basis.ncols() == basis.nrows() {
        return Ok(Mat::zeros((basis.nrows(), 0)));
    }
    let room = basis.nrows() - basis.ncols();
    let (u, sv, _) = project_out(basis, cand).svddc(JobSvd::Some)?;
    let u = u.expect("left factors");
    let floor = cutoff.max(PROJECTION_NOISE);
    let k = sv.iter().take_while(|&&v| v > floor * scale).count().min(room);
    Ok(u.slice(s![.., ..k]).to_owned())
}

/// Exactly `want` orthonormal directions outside `basis`, preferring `cand`.
fn pad_basis(basis: &Mat, cand: &Mat, want: usize) -> Result<Mat> {
    let want = want.min(basis.nrows() - basis.ncols());
    let mut picked = complement(basis, cand, 1e-8)?;
    if picked.ncols() > want {
        picked = picked.slice(s![.., ..want]).to_owned();
    }
    if picked.ncols() < want {
        let both = concatenate![Axis(1), basis.view(), picked.view()];
        let (u, _, _) = project_out(&both, &Mat::eye(basis.nrows())).svddc(JobSvd::Some)?;
        let u = u.expect("left factors");
        picked = concatenate![Axis(1), picked.view(), u.slice(s![.., ..want - picked.ncols()])];
    }
    Ok(picked)
}

#[derive(Debug, Clone)]
struct Pivot {
    cell: usize,
    xdim: usize,
    inv: Mat,
    /// `(row node, block of that row in the pivot columns)`.
    rows: Vec<(Node, Mat)>,
    /// `(column node, P^{-1} times the pivot rows of that column)`.
    cols: Vec<(Node, Mat)>,
}

#[derive(Debug, Clone)]
struct LevelRecord {
    level: usize,
    xdim: Vec<usize>,
    rdim: Vec<usize>,
    pivots: Vec<Pivot>,
}

#[derive(Debug, Clone)]
struct Top {
    inv: Mat,
    /// Cell dimensions of the top system in order.
    dims: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IfmmStats {
    pub epsilon: f64,
    pub depth: usize,
    /// Initial auxiliary dimension over `2N`.
    pub aux_ratio: f64,
    /// Largest retained rank per level after elimination (index = level).
    pub max_rank: Vec<usize>,
    pub compressions: usize,
    pub regularizations: usize,
    pub factor_bytes: usize,
    pub peak_store_bytes: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorOptions {
    pub epsilon: f64,
    /// Keep the elimination record for `apply_inverse`.
    pub keep_factors: bool,
    /// Verify after every pivot that no dense block links well-separated cells.
    pub audit: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { epsilon: 1e-7, keep_factors: true, audit: false }
    }
}

/// Approximate inverse of an H2 matrix.
#[derive(Debug, Clone)]
pub struct IfmmFactorization {
    dim: usize,
    depth: usize,
    /// Leaf point ordering for gathering and scattering.
    h2_order: Vec<Vec<usize>>,
    /// `children[l][p]`: cells of level `l + 1` below cell `p` of level `l`.
    children: Vec<Vec<Vec<usize>>>,
    levels: Vec<LevelRecord>,
    top: Top,
    pub stats: IfmmStats,
}

struct LevelState<'a> {
    level: usize,
    tree: &'a QuadTree,
    eps: f64,
    xdim: Vec<usize>,
    ru: Vec<usize>,
    rv: Vec<usize>,
    store: BlockStore,
    lblk: Vec<Option<Mat>>,
    fblk: Vec<Option<Mat>>,
    u: Vec<Mat>,
    v: Vec<Mat>,
    active: Vec<bool>,
    compressions: usize,
    regularizations: usize,
    peak_bytes: usize,
}

struct RawLevel {
    level: usize,
    xdim: Vec<usize>,
    u: Vec<Mat>,
    v: Vec<Mat>,
    near: Vec<((usize, usize), Mat)>,
}

/// `A = P diag(s) Q^T` with `k = min(p, r)` columns and the map `diag(s) Q^T`.
fn orthonormalize(a: &Mat) -> Result<(Mat, Mat)> {
    let (u, sv, vt) = a.svddc(JobSvd::Some)?;
    let (u, mut vt) = (u.expect("left factors"), vt.expect("right factors"));
    for (j, v) in sv.iter().enumerate() {
        vt.row_mut(j).mapv_inplace(|x| x * v);
    }
    Ok((u, vt))
}

impl<'a> LevelState<'a> {
    fn new(raw: RawLevel, h2: &'a H2Matrix, eps: f64) -> Result<Self> {
        let tree = &h2.tree;
        let l = raw.level;
        let ncell = raw.xdim.len();
        let basis = h2.basis.level(l).expect("basis on every eliminated level");
        let mut store = BlockStore::default();
        for ((c, d), m) in raw.near {
            store.insert(Node::X(c), Node::X(d), m);
        }
        let mut us = Vec::with_capacity(ncell);
        let mut vs = Vec::with_capacity(ncell);
        let mut ms = Vec::with_capacity(ncell);
        let mut ns = Vec::with_capacity(ncell);
        for c in 0..ncell {
            let (u, m) = orthonormalize(&raw.u[c])?;
            let (v, n) = orthonormalize(&raw.v[c])?;
            let k = u.ncols().min(v.ncols());
            let (u, m) = (u.slice(s![.., ..k]).to_owned(), m.slice(s![..k, ..]).to_owned());
            let (v, n) = (v.slice(s![.., ..k]).to_owned(), n.slice(s![..k, ..]).t().to_owned());
            store.insert(Node::X(c), Node::Z(c), u.clone());
            store.insert(Node::Z(c), Node::X(c), v.t().to_owned());
            store.insert(Node::Z(c), Node::Y(c), neg_eye(k));
            store.insert(Node::Y(c), Node::Z(c), neg_eye(k));
            us.push(u);
            vs.push(v);
            ms.push(m);
            ns.push(n);
        }
        let cells = &tree.levels[l].cells;
        for (c, cell) in cells.iter().enumerate() {
            for &d in &cell.interactions {
                let coupling = &basis.couplings[&cell.offset_to(&cells[d])];
                store.insert(Node::Y(c), Node::Y(d), ms[c].dot(coupling).dot(&ns[d]));
            }
        }
        let (mut lblk, mut fblk) = (vec![None; ncell], vec![None; ncell]);
        if let Some(e) = basis.transfer.as_ref() {
            for (c, cell) in cells.iter().enumerate() {
                let q = cell.quadrant();
                lblk[c] = Some(ms[c].dot(&e[q]));
                fblk[c] = Some(e[q].t().dot(&ns[c]));
            }
        }
        let ranks: Vec<usize> = us.iter().map(|u| u.ncols()).collect();
        Ok(Self {
            level: l,
            tree,
            eps,
            xdim: raw.xdim,
            ru: ranks.clone(),
            rv: ranks,
            store,
            lblk,
            fblk,
            u: us,
            v: vs,
            active: vec![true; ncell],
            compressions: 0,
            regularizations: 0,
            peak_bytes: 0,
        })
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        let cells = &self.tree.levels[self.level].cells;
        cells[a].adjacent(&cells[b])
    }

    fn cutoff(&self) -> f64 {
        if self.eps > 0.0 {
            self.eps
        } else {
            EXACT_CUTOFF
        }
    }

    fn dim_rows(&self, n: Node) -> usize {
        match n {
            Node::X(c) => self.xdim[c],
            Node::Z(c) => self.rv[c],
            Node::Y(c) => self.ru[c],
        }
    }

    fn dim_cols(&self, n: Node) -> usize {
        match n {
            Node::X(c) => self.xdim[c],
            Node::Z(c) => self.ru[c],
            Node::Y(c) => self.rv[c],
        }
    }

    fn expand_u(&mut self, j: usize, new: Mat) {
        let k = new.ncols();
        if k == 0 {
            return;
        }
        self.u[j] = concatenate![Axis(1), self.u[j].view(), new.view()];
        self.ru[j] += k;
        self.store.insert(Node::X(j), Node::Z(j), self.u[j].clone());
        self.store.remove(Node::Y(j), Node::Z(j));
        self.store.map_row(Node::Y(j), |b| pad_rows(b, k));
        self.store.insert(Node::Y(j), Node::Z(j), neg_eye(self.ru[j]));
        if let Some(lb) = self.lblk[j].as_mut() {
            *lb = pad_rows(lb, k);
        }
    }

    fn expand_v(&mut self, j: usize, new: Mat) {
        let k = new.ncols();
        if k == 0 {
            return;
        }
        self.v[j] = concatenate![Axis(1), self.v[j].view(), new.view()];
        self.rv[j] += k;
        self.store.insert(Node::Z(j), Node::X(j), self.v[j].t().to_owned());
        self.store.remove(Node::Z(j), Node::Y(j));
        self.store.map_col(Node::Y(j), |b| pad_cols(b, k));
        self.store.insert(Node::Z(j), Node::Y(j), neg_eye(self.rv[j]));
        if let Some(fb) = self.fblk[j].as_mut() {
            *fb = pad_cols(fb, k);
        }
    }

    /// Redirects a well-separated fill-in through the low-rank channels.
    fn compress(&mut self, r: Node, c: Node) -> Result<()> {
        let Some(f) = self.store.remove(r, c) else { return Ok(()) };
        self.compressions += 1;
        let cut = self.cutoff();
        let Some((left, right)) = truncated(&f, cut)? else { return Ok(()) };
        match (r, c) {
            (Node::X(j), Node::X(k)) => {
                let nu = complement(&self.u[j], &left, cut)?;
                self.expand_u(j, nu);
                let nv = complement(&self.v[k], &right, cut)?;
                self.expand_v(k, nv);
                let d = self.u[j].t().dot(&f).dot(&self.v[k]);
                self.store.add(Node::Y(j), Node::Y(k), d);
            }
            (Node::X(j), Node::Y(k)) => {
                let nu = complement(&self.u[j], &left, cut)?;
                self.expand_u(j, nu);
                let d = self.u[j].t().dot(&f);
                self.store.add(Node::Y(j), Node::Y(k), d);
            }
            (Node::Y(k), Node::X(m)) => {
                let nv = complement(&self.v[m], &right, cut)?;
                self.expand_v(m, nv);
                let d = f.dot(&self.v[m]);
                self.store.add(Node::Y(k), Node::Y(m), d);
            }
            _ => self.store.insert(r, c, f),
        }
        Ok(())
    }

    fn equalize(&mut self, i: usize) -> Result<()> {
        if self.ru[i] < self.rv[i] {
            let nu = pad_basis(&self.u[i], &self.v[i], self.rv[i] - self.ru[i])?;
            self.expand_u(i, nu);
        } else if self.rv[i] < self.ru[i] {
            let nv = pad_basis(&self.v[i], &self.u[i], self.ru[i] - self.rv[i])?;
            self.expand_v(i, nv);
        }
        Ok(())
    }

    fn eliminate(&mut self, i: usize, keep: bool, audit: bool) -> Result<Option<Pivot>> {
        self.equalize(i)?;
        let (px, pz) = (Node::X(i), Node::Z(i));
        let (nx, nr) = (self.xdim[i], self.ru[i]);
        let pd = nx + nr;
        let mut p = Mat::zeros((pd, pd));
        let place = |p: &mut Mat, r0: usize, c0: usize, b: Option<&Mat>| {
            if let Some(b) = b {
                p.slice_mut(s![r0..r0 + b.nrows(), c0..c0 + b.ncols()]).assign(b);
            }
        };
        place(&mut p, 0, 0, self.store.get(px, px));
        place(&mut p, 0, nx, self.store.get(px, pz));
        place(&mut p, nx, 0, self.store.get(pz, px));
        place(&mut p, nx, nx, self.store.get(pz, pz));
        let inv = self.invert_pivot(p, nx, i)?;

        let piv = [px, pz];
        let rows_out: Vec<Node> = piv
            .iter()
            .flat_map(|&n| self.store.col(n))
            .filter(|n| !piv.contains(n))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cols_out: Vec<Node> = piv
            .iter()
            .flat_map(|&n| self.store.row(n))
            .filter(|n| !piv.contains(n))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let col_dims: Vec<usize> = cols_out.iter().map(|&n| self.dim_cols(n)).collect();
        let total: usize = col_dims.iter().sum();
        let mut m = Mat::zeros((pd, total));
        let mut off = 0;
        for (&b, &w) in cols_out.iter().zip(&col_dims) {
            place(&mut m, 0, off, self.store.get(px, b));
            place(&mut m, nx, off, self.store.get(pz, b));
            off += w;
        }
        let g = inv.dot(&m);
        let mut row_blocks = Vec::with_capacity(rows_out.len());
        for &a in &rows_out {
            let mut ma = Mat::zeros((self.dim_rows(a), pd));
            place(&mut ma, 0, 0, self.store.get(a, px));
            place(&mut ma, 0, nx, self.store.get(a, pz));
            let upd = ma.dot(&g);
            let mut off = 0;
            for (&b, &w) in cols_out.iter().zip(&col_dims) {
                let blk = upd.slice(s![.., off..off + w]).to_owned();
                self.store.add(a, b, -blk);
                off += w;
            }
            row_blocks.push((a, ma));
        }
        self.peak_bytes = self.peak_bytes.max(self.store.bytes());
        for &n in &piv {
            for c in self.store.row(n) {
                self.store.remove(n, c);
            }
            for r in self.store.col(n) {
                self.store.remove(r, n);
            }
        }
        self.active[i] = false;

        for &a in &rows_out {
            for &b in &cols_out {
                let (ca, cb) = (a.cell(), b.cell());
                let separated = !self.adjacent(ca, cb);
                let mixed = matches!((a, b), (Node::X(_), _) | (_, Node::X(_)));
                if separated && mixed && self.store.get(a, b).is_some() {
                    self.compress(a, b)?;
                }
            }
        }
        if audit {
            self.audit()?;
        }
        if !keep {
            return Ok(None);
        }
        let mut cols = Vec::with_capacity(cols_out.len());
        let mut off = 0;
        for (&b, &w) in cols_out.iter().zip(&col_dims) {
            cols.push((b, g.slice(s![.., off..off + w]).to_owned()));
            off += w;
        }
        Ok(Some(Pivot { cell: i, xdim: nx, inv, rows: row_blocks, cols }))
    }

    fn invert_pivot(&mut self, mut p: Mat, nx: usize, cell: usize) -> Result<Mat> {
        let breakdown = || Error::PivotBreakdown { level: 0, cell };
        let lu = p.factorize().map_err(|_| breakdown())?;
        let rc = lu.rcond().unwrap_or(0.0);
        if rc >= RCOND_MIN {
            return lu.inv().map_err(|_| breakdown());
        }
        self.regularizations += 1;
        let norm = p.slice(s![..nx, ..nx]).norm_l2().max(f64::MIN_POSITIVE);
        for k in 0..nx {
            p[[k, k]] += SHIFT * norm;
        }
        let lu = p.factorize().map_err(|_| breakdown())?;
        match lu.rcond() {
            Ok(r) if r > 0.0 && r.is_finite() => lu.inv().map_err(|_| breakdown()),
            _ => Err(breakdown()),
        }
    }

    /// Structural check: no dense block joins well-separated cells unless it
    /// is a coupling between multipole unknowns.
    fn audit(&self) -> Result<()> {
        for &(r, c) in self.store.blocks.keys() {
            let mixed = matches!((r, c), (Node::X(_), _) | (_, Node::X(_)));
            if mixed && !self.adjacent(r.cell(), c.cell()) {
                return Err(Error::Config(format!(
                    "dense block between well-separated cells {} and {} on level {}",
                    r.cell(),
                    c.cell(),
                    self.level
                )));
            }
        }
        Ok(())
    }

    /// Remaining multipole unknowns regrouped by parent cell.
    fn next_level(self) -> Result<RawLevel> {
        let l = self.level - 1;
        let parents = &self.tree.levels[l].cells;
        let children = &self.tree.levels[self.level].cells;
        let mut local = vec![(0usize, 0usize); children.len()];
        let mut xdim = vec![0usize; parents.len()];
        for (pi, p) in parents.iter().enumerate() {
            for &c in &p.children {
                local[c] = (pi, xdim[pi]);
                xdim[pi] += self.rv[c];
            }
        }
        let stack = |blocks: &[Option<Mat>], transpose: bool| -> Vec<Mat> {
            parents
                .iter()
                .map(|p| {
                    let parts: Vec<Mat> = p
                        .children
                        .iter()
                        .map(|&c| {
                            let b = blocks[c].as_ref().expect("transfer block");
                            if transpose {
                                b.t().to_owned()
                            } else {
                                b.clone()
                            }
                        })
                        .collect();
                    let views: Vec<_> = parts.iter().map(|m| m.view()).collect();
                    concatenate(Axis(0), &views).expect("consistent widths")
                })
                .collect()
        };
        let (u, v) = if l >= 2 {
            (stack(&self.lblk, false), stack(&self.fblk, true))
        } else {
            (Vec::new(), Vec::new())
        };
        let mut near: HashMap<(usize, usize), Mat> = HashMap::new();
        let mut keys: Vec<&(Node, Node)> = self.store.blocks.keys().collect();
        keys.sort();
        for &&(r, c) in &keys {
            let (Node::Y(a), Node::Y(b)) = (r, c) else {
                return Err(Error::Config(format!("unexpected block {r:?} {c:?} after level {}", self.level)));
            };
            let (pa, oa) = local[a];
            let (pb, ob) = local[b];
            if !parents[pa].adjacent(&parents[pb]) {
                return Err(Error::Config(format!("coupling between non-adjacent parents {pa} {pb}")));
            }
            let blk = &self.store.blocks[&(r, c)];
            let entry = near.entry((pa, pb)).or_insert_with(|| Mat::zeros((xdim[pa], xdim[pb])));
            entry.slice_mut(s![oa..oa + blk.nrows(), ob..ob + blk.ncols()]).assign(blk);
        }
        let mut near: Vec<((usize, usize), Mat)> = near.into_iter().collect();
        near.sort_by_key(|(k, _)| *k);
        Ok(RawLevel { level: l, xdim, u, v, near })
    }
}

fn dense_from_blocks(xdim: &[usize], blocks: &[((usize, usize), Mat)]) -> Mat {
    let mut offs = vec![0usize; xdim.len() + 1];
    for (k, d) in xdim.iter().enumerate() {
        offs[k + 1] = offs[k] + d;
    }
    let mut out = Mat::zeros((offs[xdim.len()], offs[xdim.len()]));
    for ((a, b), m) in blocks {
        out.slice_mut(s![offs[*a]..offs[*a] + m.nrows(), offs[*b]..offs[*b] + m.ncols()]).assign(m);
    }
    out
}

fn leaf_level(h2: &H2Matrix) -> RawLevel {
    let depth = h2.tree.depth;
    let xdim = h2.tree.leaves().iter().map(|c| 2 * c.len()).collect();
    let near = h2
        .near
        .iter()
        .enumerate()
        .flat_map(|(c, row)| row.iter().map(move |(d, m)| ((c, *d), m.clone())))
        .collect();
    RawLevel { level: depth, xdim, u: h2.leaf_u.clone(), v: h2.leaf_v.clone(), near }
}

impl IfmmFactorization {
    pub fn new(ext: &ExtendedSystem, opts: &FactorOptions) -> Result<Self> {
        let start = Instant::now();
        let h2 = ext.h2();
        let depth = h2.tree.depth;
        let mut stats = IfmmStats {
            epsilon: opts.epsilon,
            depth,
            aux_ratio: ext.aux_ratio(),
            max_rank: vec![0; depth + 1],
            ..IfmmStats::default()
        };
        let mut raw = leaf_level(h2);
        let mut records = Vec::new();
        while raw.level >= 2 {
            let mut state = LevelState::new(raw, h2, opts.epsilon)?;
            let level = state.level;
            let ncell = state.xdim.len();
            let mut pivots = Vec::new();
            for i in 0..ncell {
                let piv = state.eliminate(i, opts.keep_factors, opts.audit).map_err(|e| match e {
                    Error::PivotBreakdown { cell, .. } => Error::PivotBreakdown { level, cell },
                    other => other,
                })?;
                if let Some(p) = piv {
                    stats.factor_bytes += 8 * (p.inv.len()
                        + p.rows.iter().map(|(_, m)| m.len()).sum::<usize>()
                        + p.cols.iter().map(|(_, m)| m.len()).sum::<usize>());
                    pivots.push(p);
                }
            }
            stats.max_rank[level] = state.ru.iter().copied().max().unwrap_or(0);
            stats.compressions += state.compressions;
            stats.regularizations += state.regularizations;
            stats.peak_store_bytes = stats.peak_store_bytes.max(state.peak_bytes);
            records.push(LevelRecord {
                level,
                xdim: state.xdim.clone(),
                rdim: state.ru.clone(),
                pivots,
            });
            raw = state.next_level()?;
        }
        let a = dense_from_blocks(&raw.xdim, &raw.near);
        let inv = if a.is_empty() {
            a
        } else {
            let lu = a.factorize().map_err(|_| Error::PivotBreakdown { level: raw.level, cell: 0 })?;
            lu.inv().map_err(|_| Error::PivotBreakdown { level: raw.level, cell: 0 })?
        };
        stats.factor_bytes += 8 * inv.len();
        stats.seconds = start.elapsed().as_secs_f64();
        let h2_order = h2.tree.leaves().iter().map(|c| h2.tree.points_of(c).to_vec()).collect();
        let children = h2.tree.levels.iter().map(|lv| lv.cells.iter().map(|c| c.children.clone()).collect()).collect();
        Ok(Self {
            dim: h2.dim(),
            depth,
            h2_order,
            children,
            levels: records,
            top: Top { inv, dims: raw.xdim },
            stats,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn has_factors(&self) -> bool {
        self.levels.iter().all(|r| r.pivots.len() == r.xdim.len())
    }

    pub fn apply_inverse(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rhs.len() });
        }
        if !self.has_factors() {
            return Err(Error::Config("factorization was computed without keeping factors".into()));
        }
        let mut bx: Vec<Array1<f64>> = self
            .h2_order
            .iter()
            .map(|idx| Array1::from_iter(idx.iter().flat_map(|&i| [rhs[2 * i], rhs[2 * i + 1]])))
            .collect();
        let mut saved: Vec<Vec<Array1<f64>>> = Vec::with_capacity(self.levels.len());
        for rec in &self.levels {
            let mut bz: Vec<Array1<f64>> = rec.rdim.iter().map(|&r| Array1::zeros(r)).collect();
            let mut by: Vec<Array1<f64>> = rec.rdim.iter().map(|&r| Array1::zeros(r)).collect();
            let mut ts = vec![Array1::zeros(0); rec.xdim.len()];
            for p in &rec.pivots {
                let i = p.cell;
                let b = concatenate![Axis(0), bx[i].view(), bz[i].view()];
                let t = p.inv.dot(&b);
                for (a, ma) in &p.rows {
                    let d = ma.dot(&t);
                    match *a {
                        Node::X(c) => bx[c] -= &d,
                        Node::Z(c) => bz[c] -= &d,
                        Node::Y(c) => by[c] -= &d,
                    }
                }
                ts[i] = t;
            }
            saved.push(ts);
            bx = self.regroup(rec, &by);
        }
        let b = concatenate(Axis(0), &bx.iter().map(|v| v.view()).collect::<Vec<_>>()).expect("vectors");
        let x = if self.top.inv.is_empty() { b } else { self.top.inv.dot(&b) };
        let mut xs = split(&x, &self.top.dims);
        for (rec, ts) in self.levels.iter().zip(saved).rev() {
            let xy = self.ungroup(rec, &xs);
            let mut xx: Vec<Array1<f64>> = rec.xdim.iter().map(|_| Array1::zeros(0)).collect();
            let mut xz: Vec<Array1<f64>> = rec.xdim.iter().map(|_| Array1::zeros(0)).collect();
            for p in rec.pivots.iter().rev() {
                let mut v = ts[p.cell].clone();
                for (b, g) in &p.cols {
                    let xb = match *b {
                        Node::X(c) => &xx[c],
                        Node::Z(c) => &xz[c],
                        Node::Y(c) => &xy[c],
                    };
                    v -= &g.dot(xb);
                }
                xx[p.cell] = v.slice(s![..p.xdim]).to_owned();
                xz[p.cell] = v.slice(s![p.xdim..]).to_owned();
            }
            xs = xx;
        }
        let mut out = vec![0.0; self.dim];
        for (idx, v) in self.h2_order.iter().zip(&xs) {
            for (a, &i) in idx.iter().enumerate() {
                out[2 * i] = v[2 * a];
                out[2 * i + 1] = v[2 * a + 1];
            }
        }
        Ok(out)
    }

    /// Multipole right-hand sides of level `rec.level` stacked per parent.
    fn regroup(&self, rec: &LevelRecord, by: &[Array1<f64>]) -> Vec<Array1<f64>> {
        self.children[rec.level - 1]
            .iter()
            .map(|kids| {
                let views: Vec<_> = kids.iter().map(|&c| by[c].view()).collect();
                concatenate(Axis(0), &views).expect("vectors")
            })
            .collect()
    }

    fn ungroup(&self, rec: &LevelRecord, xs: &[Array1<f64>]) -> Vec<Array1<f64>> {
        let mut out = vec![Array1::zeros(0); rec.rdim.len()];
        for (kids, x) in self.children[rec.level - 1].iter().zip(xs) {
            let mut off = 0;
            for &c in kids {
                out[c] = x.slice(s![off..off + rec.rdim[c]]).to_owned();
                off += rec.rdim[c];
            }
        }
        out
    }
}

fn split(x: &Array1<f64>, dims: &[usize]) -> Vec<Array1<f64>> {
    let mut out = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &d in dims {
        out.push(x.slice(s![off..off + d]).to_owned());
        off += d;
    }
    out
}

impl LinearOperator for IfmmFactorization {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let r = self.apply_inverse(x).expect("factors kept");
        y.copy_from_slice(&r);
    }
}
