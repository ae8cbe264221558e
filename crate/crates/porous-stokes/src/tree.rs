//! Uniform quadtree over a point cloud with Morton-ordered cells.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

const MAX_DEPTH: usize = 16;

/// How the tree depth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthRule {
    /// Smallest depth whose mean nonempty-leaf population is at most this value.
    MeanLeaf(f64),
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub ix: u32,
    pub iy: u32,
    /// Range into `QuadTree::order`.
    pub range: Range<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Adjacent cells on the same level, including the cell itself.
    pub neighbors: Vec<usize>,
    /// Children of the parent's neighbors that are not adjacent.
    pub interactions: Vec<usize>,
}

impl Cell {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    /// Child position `qx + 2 qy` inside its parent.
    pub fn quadrant(&self) -> usize {
        (self.ix as usize & 1) + 2 * (self.iy as usize & 1)
    }

    pub fn adjacent(&self, other: &Cell) -> bool {
        self.ix.abs_diff(other.ix) <= 1 && self.iy.abs_diff(other.iy) <= 1
    }

    pub fn offset_to(&self, other: &Cell) -> (i32, i32) {
        (other.ix as i32 - self.ix as i32, other.iy as i32 - self.iy as i32)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Level {
    pub cells: Vec<Cell>,
    lookup: HashMap<(u32, u32), usize>,
}

impl Level {
    pub fn find(&self, ix: u32, iy: u32) -> Option<usize> {
        self.lookup.get(&(ix, iy)).copied()
    }
}

#[derive(Debug, Clone)]
pub struct QuadTree {
    pub lower: Point,
    pub width: f64,
    pub depth: usize,
    /// Points sorted by Morton key; `order[k]` is the original point index.
    pub order: Vec<usize>,
    pub levels: Vec<Level>,
}

fn interleave(x: u32, y: u32) -> u64 {
    let spread = |v: u32| {
        let mut v = v as u64;
        v = (v | (v << 16)) & 0x0000_FFFF_0000_FFFF;
        v = (v | (v << 8)) & 0x00FF_00FF_00FF_00FF;
        v = (v | (v << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    };
    spread(x) | (spread(y) << 1)
}

impl QuadTree {
    pub fn new(points: &[Point], rule: DepthRule) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateTree("no points".into()));
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let side = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE) * (1.0 + 1e-9);
        let lower = [0.5 * (x0 + x1) - 0.5 * side, 0.5 * (y0 + y1) - 0.5 * side];
        let depth = match rule {
            DepthRule::Fixed(d) => {
                if d > MAX_DEPTH {
                    return Err(Error::DegenerateTree(format!("depth {d} exceeds {MAX_DEPTH}")));
                }
                d
            }
            DepthRule::MeanLeaf(target) => {
                let mut d = 0;
                while d < MAX_DEPTH {
                    let occupied = Self::occupied_leaves(points, lower, side, d);
                    if points.len() as f64 / occupied as f64 <= target {
                        break;
                    }
                    d += 1;
                }
                d
            }
        };
        let tree = Self::build(points, lower, side, depth);
        if depth > 0 && tree.levels[depth].cells.len() == 1 && points.len() > 1 {
            return Err(Error::DegenerateTree(format!(
                "all {} points fall into one leaf at depth {depth}",
                points.len()
            )));
        }
        Ok(tree)
    }

    fn cell_index(p: Point, lower: Point, side: f64, depth: usize) -> (u32, u32) {
        let m = 1u32 << depth;
        let f = |v: f64, lo: f64| (((v - lo) / side * m as f64).floor().max(0.0) as u32).min(m - 1);
        (f(p[0], lower[0]), f(p[1], lower[1]))
    }

    fn occupied_leaves(points: &[Point], lower: Point, side: f64, depth: usize) -> usize {
        let mut keys: Vec<u64> = points
            .iter()
            .map(|p| {
                let (ix, iy) = Self::cell_index(*p, lower, side, depth);
                interleave(ix, iy)
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    fn build(points: &[Point], lower: Point, side: f64, depth: usize) -> Self {
        let keys: Vec<(u64, u32, u32)> = points
            .iter()
            .map(|p| {
                let (ix, iy) = Self::cell_index(*p, lower, side, depth);
                (interleave(ix, iy), ix, iy)
            })
            .collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by_key(|&i| (keys[i].0, i));

        let mut levels: Vec<Level> = vec![Level::default(); depth + 1];
        for (l, level) in levels.iter_mut().enumerate() {
            let shift = depth - l;
            let mut start = 0;
            while start < order.len() {
                let (_, ix, iy) = keys[order[start]];
                let (cx, cy) = (ix >> shift, iy >> shift);
                let mut end = start + 1;
                while end < order.len() {
                    let (_, jx, jy) = keys[order[end]];
                    if (jx >> shift, jy >> shift) != (cx, cy) {
                        break;
                    }
                    end += 1;
                }
                level.lookup.insert((cx, cy), level.cells.len());
                level.cells.push(Cell {
                    ix: cx,
                    iy: cy,
                    range: start..end,
                    parent: None,
                    children: Vec::new(),
                    neighbors: Vec::new(),
                    interactions: Vec::new(),
                });
                start = end;
            }
        }
        for l in 1..=depth {
            let (upper, lower_levels) = levels.split_at_mut(l);
            let parent_level = &mut upper[l - 1];
            for (k, cell) in lower_levels[0].cells.iter_mut().enumerate() {
                let p = parent_level.find(cell.ix >> 1, cell.iy >> 1).expect("parent exists");
                cell.parent = Some(p);
                parent_level.cells[p].children.push(k);
            }
        }
        for l in 0..=depth {
            let neighbors: Vec<Vec<usize>> = levels[l]
                .cells
                .iter()
                .map(|c| {
                    let mut out = Vec::new();
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (x, y) = (c.ix as i64 + dx, c.iy as i64 + dy);
                            if x < 0 || y < 0 {
                                continue;
                            }
                            if let Some(k) = levels[l].find(x as u32, y as u32) {
                                out.push(k);
                            }
                        }
                    }
                    out.sort_unstable();
                    out
                })
                .collect();
            for (c, n) in levels[l].cells.iter_mut().zip(neighbors) {
                c.neighbors = n;
            }
        }
        for l in 2..=depth {
            let lists: Vec<Vec<usize>> = levels[l]
                .cells
                .iter()
                .map(|c| {
                    let parent = &levels[l - 1].cells[c.parent.expect("parent")];
                    let mut out: Vec<usize> = parent
                        .neighbors
                        .iter()
                        .flat_map(|&q| levels[l - 1].cells[q].children.iter().copied())
                        .filter(|&d| !c.adjacent(&levels[l].cells[d]))
                        .collect();
                    out.sort_unstable();
                    out
                })
                .collect();
            for (c, il) in levels[l].cells.iter_mut().zip(lists) {
                c.interactions = il;
            }
        }
        Self {
            lower,
            width: side,
            depth,
            order,
            levels,
        }
    }

    pub fn leaves(&self) -> &[Cell] {
        &self.levels[self.depth].cells
    }

    pub fn half_width(&self, level: usize) -> f64 {
        0.5 * self.width / (1u64 << level) as f64
    }

    pub fn center(&self, level: usize, cell: &Cell) -> Point {
        let w = self.width / (1u64 << level) as f64;
        [
            self.lower[0] + (cell.ix as f64 + 0.5) * w,
            self.lower[1] + (cell.iy as f64 + 0.5) * w,
        ]
    }

    /// Original point indices of a cell.
    pub fn points_of<'a>(&'a self, cell: &Cell) -> &'a [usize] {
        &self.order[cell.range.clone()]
    }

    pub fn mean_leaf_population(&self) -> f64 {
        self.order.len() as f64 / self.leaves().len() as f64
    }
}
