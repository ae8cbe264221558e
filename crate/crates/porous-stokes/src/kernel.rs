//! Stokes single-layer kernel and boundary data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryDiscretization, Point, PorousGeometry};

/// Prefactor of the single-layer potential, applied at assembly.
pub const SLP_SCALE: f64 = 1.0 / (4.0 * PI);

/// 2x2 block stored row-major: `[g00, g01, g10, g11]`.
pub type KernelBlock = [f64; 4];

/// `-log(rho) I + r r^T / rho^2` for `r = x - y`, without the prefactor.
#[inline]
pub fn stokeslet(x: Point, y: Point) -> KernelBlock {
    let r0 = x[0] - y[0];
    let r1 = x[1] - y[1];
    let rho2 = r0 * r0 + r1 * r1;
    let lg = -0.5 * rho2.ln();
    let off = r0 * r1 / rho2;
    [lg + r0 * r0 / rho2, off, off, lg + r1 * r1 / rho2]
}

/// Checked variant that refuses coincident points.
pub fn slp_kernel(x: Point, y: Point) -> Result<KernelBlock> {
    if x == y {
        return Err(Error::CoincidentPoints(x[0], x[1]));
    }
    Ok(stokeslet(x, y))
}

/// `(x - c)^perp / |x - c|^2` with `(a, b)^perp = (b, -a)`.
#[inline]
pub fn rotlet(x: Point, c: Point) -> Point {
    let r0 = x[0] - c[0];
    let r1 = x[1] - c[1];
    let rho2 = r0 * r0 + r1 * r1;
    [r1 / rho2, -r0 / rho2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub c: Point,
    pub lambda: [f64; 2],
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bc", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Shear,
    Pipe { k: f64, half_height: f64 },
    StokesletRotlet { seed: u64, sources: Vec<Singularity> },
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Shear => "shear",
            BoundaryCondition::Pipe { .. } => "pipe",
            BoundaryCondition::StokesletRotlet { .. } => "stokeslet_rotlet",
        }
    }

    /// Stokeslet/rotlet combination with one source inside each pore and one
    /// outside the wall at `(L/2, 2H)`; strengths uniform in `[-1, 1]`.
    pub fn random_stokeslet_rotlet(geom: &PorousGeometry, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outside = [0.5 * geom.wall.length, 2.0 * geom.wall.half_height];
        let centers = std::iter::once(outside).chain(geom.pores.iter().map(|p| p.center()));
        let sources = centers
            .map(|c| Singularity {
                c,
                lambda: [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
                mu: rng.random_range(-1.0..=1.0),
            })
            .collect();
        BoundaryCondition::StokesletRotlet { seed, sources }
    }

    /// Known velocity field, where one exists.
    pub fn reference(&self, x: Point) -> Option<Point> {
        match self {
            BoundaryCondition::Shear => Some([x[1], 0.0]),
            BoundaryCondition::Pipe { .. } => None,
            BoundaryCondition::StokesletRotlet { sources, .. } => Some(stokeslet_rotlet_field(x, sources)),
        }
    }
}

pub fn stokeslet_rotlet_field(x: Point, sources: &[Singularity]) -> Point {
    let mut u = [0.0, 0.0];
    for s in sources {
        let g = stokeslet(x, s.c);
        let r = rotlet(x, s.c);
        u[0] += g[0] * s.lambda[0] + g[1] * s.lambda[1] + r[0] * s.mu;
        u[1] += g[2] * s.lambda[0] + g[3] * s.lambda[1] + r[1] * s.mu;
    }
    u
}

/// Checked evaluation that refuses singular points.
pub fn try_stokeslet_rotlet_field(x: Point, sources: &[Singularity]) -> Result<Point> {
    if let Some(s) = sources.iter().find(|s| s.c == x) {
        return Err(Error::CoincidentPoints(s.c[0], s.c[1]));
    }
    Ok(stokeslet_rotlet_field(x, sources))
}

/// Right-hand side `f` in point-major layout `(fx_0, fy_0, fx_1, ...)`.
pub fn boundary_data(disc: &BoundaryDiscretization, bc: &BoundaryCondition) -> Vec<f64> {
    let mut f = vec![0.0; disc.unknowns()];
    for (i, x) in disc.points.iter().enumerate() {
        let v = match bc {
            BoundaryCondition::Shear => [x[1], 0.0],
            BoundaryCondition::Pipe { k, half_height } => {
                if disc.bodies[disc.body_of[i]].kind == crate::geometry::BodyKind::Wall {
                    [k * (half_height * half_height - x[1] * x[1]).max(0.0), 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
            BoundaryCondition::StokesletRotlet { sources, .. } => stokeslet_rotlet_field(*x, sources),
        };
        f[2 * i] = v[0];
        f[2 * i + 1] = v[1];
    }
    f
}
