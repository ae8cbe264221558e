//! Velocity evaluation inside the fluid, reference fields and error maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryDiscretization, Point, PointClass, PorousGeometry};
use crate::kernel::{stokeslet, BoundaryCondition, SLP_SCALE};
use crate::operator::{FmmOptions, PointFmm};

/// Target counts above which the FMM is used.
const DIRECT_LIMIT: u64 = 50_000_000;

/// Trapezoid-rule single-layer velocity at the targets, without checks.
pub fn velocity_unchecked(disc: &BoundaryDiscretization, sigma: &[f64], targets: &[Point], fmm_n: usize) -> Result<Vec<Point>> {
    if sigma.len() != disc.unknowns() {
        return Err(Error::DimensionMismatch { expected: disc.unknowns(), got: sigma.len() });
    }
    if (targets.len() as u64) * (disc.len() as u64) <= DIRECT_LIMIT {
        return Ok(targets
            .iter()
            .map(|&x| {
                let (mut u0, mut u1) = (0.0, 0.0);
                for (j, &y) in disc.points.iter().enumerate() {
                    let g = stokeslet(x, y);
                    let (a, b) = (disc.ds[j] * sigma[2 * j], disc.ds[j] * sigma[2 * j + 1]);
                    u0 += g[0] * a + g[1] * b;
                    u1 += g[2] * a + g[3] * b;
                }
                [SLP_SCALE * u0, SLP_SCALE * u1]
            })
            .collect());
    }
    let mut points = disc.points.clone();
    points.extend_from_slice(targets);
    let mut weights = disc.ds.clone();
    weights.resize(points.len(), 0.0);
    let mut density = sigma.to_vec();
    density.resize(2 * points.len(), 0.0);
    let fmm = PointFmm::new(points, weights, &FmmOptions { n: fmm_n, ..FmmOptions::default() })?;
    let u = fmm.evaluate(&density);
    let base = disc.len();
    Ok((0..targets.len()).map(|k| [u[2 * (base + k)], u[2 * (base + k) + 1]]).collect())
}

/// Velocity at targets strictly inside the fluid.
pub fn evaluate_velocity(
    geom: &PorousGeometry,
    disc: &BoundaryDiscretization,
    sigma: &[f64],
    targets: &[Point],
    fmm_n: usize,
) -> Result<Vec<Point>> {
    let classifier = geom.classifier();
    for (index, &x) in targets.iter().enumerate() {
        let c = classifier.classify(x);
        if c.class != PointClass::Interior || c.distance <= 0.0 {
            return Err(Error::TargetNotInterior { index, x: x[0], y: x[1] });
        }
    }
    velocity_unchecked(disc, sigma, targets, fmm_n)
}

/// `d > sqrt(max ds)` of the nearest curve.
pub fn is_reliable(disc: &BoundaryDiscretization, distance: f64, nearest_body: usize) -> bool {
    distance > disc.bodies[nearest_body].ds.sqrt()
}

pub fn reliability_mask(geom: &PorousGeometry, disc: &BoundaryDiscretization, targets: &[Point]) -> Vec<bool> {
    let classifier = geom.classifier();
    targets
        .iter()
        .map(|&x| {
            let c = classifier.classify(x);
            is_reliable(disc, c.distance, c.nearest_body)
        })
        .collect()
}

fn magnitude(u: Point) -> f64 {
    u[0].hypot(u[1])
}

/// `| |u| - |u_ref| | / |u_ref|`, masked where `|u_ref| < 1e-8 max |u_ref|`.
pub fn error_field(u: &[Point], u_ref: &[Point]) -> Vec<Option<f64>> {
    let peak = u_ref.iter().map(|&r| magnitude(r)).fold(0.0, f64::max);
    let eta = 1e-8 * peak;
    u.iter()
        .zip(u_ref)
        .map(|(&a, &r)| {
            let m = magnitude(r);
            (m >= eta && m > 0.0).then(|| (magnitude(a) - m).abs() / m)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, x1, y0, y1]`; the wall's bounding box when absent.
    pub bounds: Option<[f64; 4]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 281, ny: 105, bounds: None }
    }
}

/// One lattice point of a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub class: String,
    pub d: f64,
    pub reliable: bool,
    pub ux: Option<f64>,
    pub uy: Option<f64>,
    pub uref_x: Option<f64>,
    pub uref_y: Option<f64>,
    pub log10_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub median_log10: f64,
    pub max_log10: f64,
}

#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub points: Vec<Point>,
    pub class: Vec<PointClass>,
    pub distance: Vec<f64>,
    pub reliable: Vec<bool>,
    pub velocity: Vec<Option<Point>>,
    pub reference: Vec<Option<Point>>,
    pub log10_err: Vec<Option<f64>>,
}

impl FieldGrid {
    pub fn new(geom: &PorousGeometry, disc: &BoundaryDiscretization, spec: &GridSpec) -> Result<Self> {
        if spec.nx < 2 || spec.ny < 2 {
            return Err(Error::Config(format!("grid needs at least 2x2 points, got {}x{}", spec.nx, spec.ny)));
        }
        let w = &geom.wall;
        let [x0, x1, y0, y1] = spec.bounds.unwrap_or([0.0, w.length, -w.half_height, w.half_height]);
        let classifier = geom.classifier();
        let mut grid = Self {
            points: Vec::new(),
            class: Vec::new(),
            distance: Vec::new(),
            reliable: Vec::new(),
            velocity: Vec::new(),
            reference: Vec::new(),
            log10_err: Vec::new(),
        };
        for j in 0..spec.ny {
            let y = y0 + (y1 - y0) * j as f64 / (spec.ny - 1) as f64;
            for i in 0..spec.nx {
                let x = x0 + (x1 - x0) * i as f64 / (spec.nx - 1) as f64;
                let c = classifier.classify([x, y]);
                grid.points.push([x, y]);
                grid.reliable.push(c.class == PointClass::Interior && is_reliable(disc, c.distance, c.nearest_body));
                grid.class.push(c.class);
                grid.distance.push(c.distance);
            }
        }
        let n = grid.points.len();
        grid.velocity = vec![None; n];
        grid.reference = vec![None; n];
        grid.log10_err = vec![None; n];
        Ok(grid)
    }

    fn interior(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&k| self.class[k] == PointClass::Interior && self.distance[k] > 0.0).collect()
    }

    /// Fills velocities at interior points and, when the condition has a
    /// closed form, reference values and errors at reliable points.
    pub fn evaluate(&mut self, disc: &BoundaryDiscretization, sigma: &[f64], bc: &BoundaryCondition, fmm_n: usize) -> Result<()> {
        let idx = self.interior();
        let targets: Vec<Point> = idx.iter().map(|&k| self.points[k]).collect();
        let u = velocity_unchecked(disc, sigma, &targets, fmm_n)?;
        for (&k, v) in idx.iter().zip(&u) {
            self.velocity[k] = Some(*v);
            self.reference[k] = bc.reference(self.points[k]);
        }
        let rel: Vec<usize> = idx.iter().copied().filter(|&k| self.reliable[k] && self.reference[k].is_some()).collect();
        let uu: Vec<Point> = rel.iter().map(|&k| self.velocity[k].expect("interior")).collect();
        let ur: Vec<Point> = rel.iter().map(|&k| self.reference[k].expect("reference")).collect();
        for (&k, e) in rel.iter().zip(error_field(&uu, &ur)) {
            self.log10_err[k] = e.map(|v| v.max(1e-300).log10());
        }
        Ok(())
    }

    pub fn stats(&self) -> Option<ErrorStats> {
        let mut v: Vec<f64> = self.log10_err.iter().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
        Some(ErrorStats { count: m, median_log10: median, max_log10: v[m - 1] })
    }

    pub fn rows(&self) -> Vec<FieldRow> {
        (0..self.points.len())
            .map(|k| FieldRow {
                x: self.points[k][0],
                y: self.points[k][1],
                class: self.class[k].label().to_string(),
                d: self.distance[k],
                reliable: self.reliable[k],
                ux: self.velocity[k].map(|u| u[0]),
                uy: self.velocity[k].map(|u| u[1]),
                uref_x: self.reference[k].map(|u| u[0]),
                uref_y: self.reference[k].map(|u| u[1]),
                log10_err: self.log10_err[k],
            })
            .collect()
    }
}
