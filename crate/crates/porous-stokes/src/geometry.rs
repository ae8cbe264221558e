//! Porous channel geometry: a rounded rectangular wall with circular pores.
//!
//! The wall is the superellipse `|2x/L - 1|^p + |y/H|^p = 1`, parameterized
//! by a polar angle and then resampled uniformly in arclength so that the
//! trapezoid rule on the collocation points is spectrally accurate.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::ops::Range;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const ARC_PANELS: usize = 256;
const ARC_ORDER: usize = 20;
const WALL_SAMPLES: usize = 4096;
pub const MAX_PACKING_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterWall {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "H")]
    pub half_height: f64,
    #[serde(rename = "p", default = "default_exponent")]
    pub exponent: u32,
}

fn default_exponent() -> u32 {
    8
}

/// Point and derivative of a curve at one parameter value.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub point: Point,
    pub derivative: Point,
}

impl CurvePoint {
    pub fn speed(&self) -> f64 {
        self.derivative[0].hypot(self.derivative[1])
    }

    /// Outward unit normal for a counterclockwise curve.
    pub fn normal(&self) -> Point {
        let s = self.speed();
        [self.derivative[1] / s, -self.derivative[0] / s]
    }
}

impl OuterWall {
    pub fn new(length: f64, half_height: f64, exponent: u32) -> Result<Self> {
        let wall = Self {
            length,
            half_height,
            exponent,
        };
        wall.validate()?;
        Ok(wall)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidWall(format!("length {} must be positive", self.length)));
        }
        if !(self.half_height > 0.0 && self.half_height.is_finite()) {
            return Err(Error::InvalidWall(format!(
                "half-height {} must be positive",
                self.half_height
            )));
        }
        if self.exponent < 4 || !self.exponent.is_multiple_of(2) {
            return Err(Error::InvalidWall(format!(
                "exponent {} must be even and at least 4",
                self.exponent
            )));
        }
        Ok(())
    }

    /// Curve point at polar angle `theta` (counterclockwise, theta = 0 at x = L).
    pub fn eval(&self, theta: f64) -> CurvePoint {
        let p = self.exponent as i32;
        let pf = self.exponent as f64;
        let (s, c) = theta.sin_cos();
        let g = c.powi(p) + s.powi(p);
        let dg = pf * (s.powi(p - 1) * c - c.powi(p - 1) * s);
        let r = g.powf(-1.0 / pf);
        let dr = -r / (pf * g) * dg;
        let hl = 0.5 * self.length;
        let h = self.half_height;
        CurvePoint {
            point: [hl * (1.0 + r * c), h * r * s],
            derivative: [hl * (dr * c - r * s), h * (dr * s + r * c)],
        }
    }

    /// Level-set value; below one strictly inside the wall.
    pub fn level(&self, x: Point) -> f64 {
        let p = self.exponent as i32;
        let u = 2.0 * x[0] / self.length - 1.0;
        let v = x[1] / self.half_height;
        u.powi(p) + v.powi(p)
    }

    pub fn contains(&self, x: Point) -> bool {
        self.level(x) < 1.0
    }

    pub fn parameterization(&self) -> WallParameterization {
        WallParameterization::new(*self)
    }
}

/// Arclength parameterization of the wall built from a composite
/// Gauss-Legendre table in the polar angle.
#[derive(Debug, Clone)]
pub struct WallParameterization {
    wall: OuterWall,
    panel_width: f64,
    cumulative: Vec<f64>,
    rule: GaussLegendreRule,
}

#[derive(Debug, Clone)]
struct GaussLegendreRule(GaussLegendre);

impl GaussLegendreRule {
    fn new(order: usize) -> Self {
        Self(GaussLegendre::new(NonZeroUsize::new(order).expect("nonzero order")))
    }

    fn integrate(&self, a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
        self.0.integrate(a, b, f)
    }
}

impl WallParameterization {
    fn new(wall: OuterWall) -> Self {
        let rule = GaussLegendreRule::new(ARC_ORDER);
        let panel_width = 2.0 * PI / ARC_PANELS as f64;
        let mut cumulative = Vec::with_capacity(ARC_PANELS + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        for k in 0..ARC_PANELS {
            let a = k as f64 * panel_width;
            total += rule.integrate(a, a + panel_width, |t| wall.eval(t).speed());
            cumulative.push(total);
        }
        Self {
            wall,
            panel_width,
            cumulative,
            rule,
        }
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[ARC_PANELS]
    }

    fn arclength(&self, theta: f64) -> f64 {
        let k = ((theta / self.panel_width).floor() as usize).min(ARC_PANELS - 1);
        let a = k as f64 * self.panel_width;
        self.cumulative[k] + self.rule.integrate(a, theta, |t| self.wall.eval(t).speed())
    }

    /// Polar angle at arclength `s` measured from theta = 0.
    pub fn theta_at(&self, s: f64) -> f64 {
        let total = self.perimeter();
        let s = s.rem_euclid(total);
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => k.min(ARC_PANELS - 1),
            Err(k) => k.saturating_sub(1).min(ARC_PANELS - 1),
        };
        let lo = k as f64 * self.panel_width;
        let hi = lo + self.panel_width;
        let frac = (s - self.cumulative[k]) / (self.cumulative[k + 1] - self.cumulative[k]);
        let mut theta = lo + frac * self.panel_width;
        for _ in 0..50 {
            let f = self.arclength(theta) - s;
            let step = f / self.wall.eval(theta).speed();
            theta = (theta - step).clamp(lo, hi);
            if step.abs() < 1e-15 * (1.0 + theta.abs()) {
                break;
            }
        }
        theta
    }

    /// `n` curve points equispaced in arclength, starting at theta = 0.
    pub fn sample(&self, n: usize) -> Vec<(f64, CurvePoint)> {
        let h = self.perimeter() / n as f64;
        (0..n)
            .map(|j| {
                let theta = self.theta_at(j as f64 * h);
                (theta, self.wall.eval(theta))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoreDisk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl PoreDisk {
    pub fn center(&self) -> Point {
        [self.cx, self.cy]
    }

    pub fn gap(&self, other: &PoreDisk) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy) - self.r - other.r
    }

    pub fn area(&self) -> f64 {
        PI * self.r * self.r
    }
}

/// Distance queries against the wall curve.
#[derive(Debug, Clone)]
pub struct WallDistance {
    wall: OuterWall,
    thetas: Vec<f64>,
    points: Vec<Point>,
}

impl WallDistance {
    pub fn new(wall: OuterWall) -> Self {
        let samples = wall.parameterization().sample(WALL_SAMPLES);
        Self {
            wall,
            thetas: samples.iter().map(|(t, _)| *t).collect(),
            points: samples.iter().map(|(_, c)| c.point).collect(),
        }
    }

    pub fn distance(&self, x: Point) -> f64 {
        let n = self.points.len();
        let (best, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| (k, (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty sample");
        let two_pi = 2.0 * PI;
        let mut lo = self.thetas[(best + n - 1) % n];
        let mut hi = self.thetas[(best + 1) % n];
        if hi < lo {
            hi += two_pi;
        }
        if lo > self.thetas[best] {
            lo -= two_pi;
        }
        let dist2 = |t: f64| {
            let p = self.wall.eval(t).point;
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let (mut fa, mut fb) = (dist2(a), dist2(b));
        for _ in 0..80 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - ratio * (hi - lo);
                fa = dist2(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + ratio * (hi - lo);
                fb = dist2(b);
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        fa.min(fb).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorousGeometry {
    #[serde(rename = "outer")]
    pub wall: OuterWall,
    pub pores: Vec<PoreDisk>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Interior,
    Pore(usize),
    Exterior,
}

impl PointClass {
    pub fn label(&self) -> &'static str {
        match self {
            PointClass::Interior => "interior",
            PointClass::Pore(_) => "pore",
            PointClass::Exterior => "exterior",
        }
    }
}

/// Classification of a point with its distance to the nearest curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: PointClass,
    pub distance: f64,
    /// Index of the nearest curve in discretization order (pores first, wall last).
    pub nearest_body: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub pore_count: usize,
    pub min_pore_gap: Option<f64>,
    pub min_wall_gap: Option<f64>,
    pub porosity: Option<f64>,
}

impl PorousGeometry {
    pub fn new(wall: OuterWall, pores: Vec<PoreDisk>) -> Result<Self> {
        let geom = Self { wall, pores };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        self.wall.validate()?;
        let dist = WallDistance::new(self.wall);
        for (index, pore) in self.pores.iter().enumerate() {
            if !(pore.r > 0.0 && pore.r.is_finite()) {
                return Err(Error::InvalidPore {
                    index,
                    reason: format!("radius {} must be positive", pore.r),
                });
            }
            if !self.wall.contains(pore.center()) || dist.distance(pore.center()) <= pore.r {
                return Err(Error::InvalidPore {
                    index,
                    reason: "disk is not strictly inside the wall".into(),
                });
            }
            for (other, q) in self.pores.iter().enumerate().take(index) {
                if pore.gap(q) <= 0.0 {
                    return Err(Error::InvalidPore {
                        index,
                        reason: format!("overlaps pore {other}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn min_pore_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.pores.iter().enumerate() {
            for b in &self.pores[i + 1..] {
                let g = a.gap(b);
                best = Some(best.map_or(g, |v| v.min(g)));
            }
        }
        best
    }

    pub fn min_wall_gap(&self) -> Option<f64> {
        let dist = WallDistance::new(self.wall);
        self.pores
            .iter()
            .map(|p| dist.distance(p.center()) - p.r)
            .reduce(f64::min)
    }

    /// One minus pore area over the area of the tight bounding box of the pore field.
    pub fn porosity(&self) -> Option<f64> {
        let first = self.pores.first()?;
        let (mut x0, mut x1) = (first.cx - first.r, first.cx + first.r);
        let (mut y0, mut y1) = (first.cy - first.r, first.cy + first.r);
        for p in &self.pores {
            x0 = x0.min(p.cx - p.r);
            x1 = x1.max(p.cx + p.r);
            y0 = y0.min(p.cy - p.r);
            y1 = y1.max(p.cy + p.r);
        }
        let area: f64 = self.pores.iter().map(PoreDisk::area).sum();
        Some(1.0 - area / ((x1 - x0) * (y1 - y0)))
    }

    pub fn stats(&self) -> GeometryStats {
        GeometryStats {
            pore_count: self.pores.len(),
            min_pore_gap: self.min_pore_gap(),
            min_wall_gap: self.min_wall_gap(),
            porosity: self.porosity(),
        }
    }

    pub fn classifier(&self) -> Classifier<'_> {
        Classifier {
            geom: self,
            wall_distance: WallDistance::new(self.wall),
        }
    }

    pub fn classify_point(&self, x: Point) -> Classification {
        self.classifier().classify(x)
    }
}

/// Reusable classifier that amortizes the wall sampling over many queries.
pub struct Classifier<'a> {
    geom: &'a PorousGeometry,
    wall_distance: WallDistance,
}

impl Classifier<'_> {
    pub fn classify(&self, x: Point) -> Classification {
        let m = self.geom.pores.len();
        let mut class = if self.geom.wall.contains(x) {
            PointClass::Interior
        } else {
            PointClass::Exterior
        };
        let mut distance = self.wall_distance.distance(x);
        let mut nearest_body = m;
        for (k, pore) in self.geom.pores.iter().enumerate() {
            let rho = (x[0] - pore.cx).hypot(x[1] - pore.cy);
            if rho < pore.r {
                class = PointClass::Pore(k);
            }
            let d = (rho - pore.r).abs();
            if d < distance {
                distance = d;
                nearest_body = k;
            }
        }
        Classification {
            class,
            distance,
            nearest_body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BodyKind {
    Pore(PoreDisk),
    Wall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub kind: BodyKind,
    pub range: Range<usize>,
    pub ds: f64,
}

impl Body {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.ds * self.len() as f64
    }
}

/// Collocation points of all curves, pores first and the wall last.
#[derive(Debug, Clone)]
pub struct BoundaryDiscretization {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub ds: Vec<f64>,
    pub body_of: Vec<usize>,
    pub bodies: Vec<Body>,
}

impl BoundaryDiscretization {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unknowns(&self) -> usize {
        2 * self.points.len()
    }

    pub fn wall(&self) -> Option<&Body> {
        self.bodies.iter().find(|b| b.kind == BodyKind::Wall)
    }

    fn push_body(&mut self, kind: BodyKind, samples: Vec<(Point, Point)>, ds: f64) {
        let start = self.points.len();
        let body = self.bodies.len();
        for (p, n) in samples {
            self.points.push(p);
            self.normals.push(n);
            self.ds.push(ds);
            self.body_of.push(body);
        }
        self.bodies.push(Body {
            kind,
            range: start..self.points.len(),
            ds,
        });
    }

    /// A single circle, used by oracles and tests.
    pub fn circle(center: Point, r: f64, n: usize) -> Result<Self> {
        check_count(n)?;
        let mut disc = Self::empty();
        let pore = PoreDisk {
            cx: center[0],
            cy: center[1],
            r,
        };
        disc.push_body(BodyKind::Pore(pore), circle_samples(&pore, n), 2.0 * PI * r / n as f64);
        Ok(disc)
    }

    fn empty() -> Self {
        Self {
            points: Vec::new(),
            normals: Vec::new(),
            ds: Vec::new(),
            body_of: Vec::new(),
            bodies: Vec::new(),
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::BadPointCount(n));
    }
    Ok(())
}

fn circle_samples(pore: &PoreDisk, n: usize) -> Vec<(Point, Point)> {
    (0..n)
        .map(|j| {
            let (s, c) = (2.0 * PI * j as f64 / n as f64).sin_cos();
            ([pore.cx + pore.r * c, pore.cy + pore.r * s], [c, s])
        })
        .collect()
}

pub fn discretize(geom: &PorousGeometry, n_int: usize, n_ext: usize) -> Result<BoundaryDiscretization> {
    if !geom.pores.is_empty() {
        check_count(n_int)?;
    }
    check_count(n_ext)?;
    geom.wall.validate()?;
    let mut disc = BoundaryDiscretization::empty();
    for pore in &geom.pores {
        let ds = 2.0 * PI * pore.r / n_int as f64;
        disc.push_body(BodyKind::Pore(*pore), circle_samples(pore, n_int), ds);
    }
    let param = geom.wall.parameterization();
    let ds = param.perimeter() / n_ext as f64;
    let samples = param
        .sample(n_ext)
        .into_iter()
        .map(|(_, c)| (c.point, c.normal()))
        .collect();
    disc.push_body(BodyKind::Wall, samples, ds);
    Ok(disc)
}

/// Parameters of the random pore generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSpec {
    pub outer: OuterWall,
    pub count: usize,
    pub radius_range: [f64; 2],
    pub min_gap: f64,
    /// Optional window `[x0, x1, y0, y1]` for pore centers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<u64>,
}

/// Rejection sampling of non-overlapping disks inside the wall.
pub fn random_packing(spec: &PackingSpec, seed: u64) -> Result<PorousGeometry> {
    let wall = spec.outer;
    wall.validate()?;
    let [rmin, rmax] = spec.radius_range;
    if !(rmin > 0.0 && rmax >= rmin) {
        return Err(Error::Config(format!("bad radius range [{rmin}, {rmax}]")));
    }
    if spec.min_gap < 0.0 {
        return Err(Error::Config(format!("negative min_gap {}", spec.min_gap)));
    }
    let [x0, x1, y0, y1] = spec
        .region
        .unwrap_or([0.0, wall.length, -wall.half_height, wall.half_height]);
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Config("empty packing region".into()));
    }
    let budget = spec.max_attempts.unwrap_or(MAX_PACKING_ATTEMPTS);
    let dist = WallDistance::new(wall);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pores: Vec<PoreDisk> = Vec::with_capacity(spec.count);
    let mut attempts = 0u64;
    while pores.len() < spec.count {
        if attempts >= budget {
            return Err(Error::PackingFailed {
                placed: pores.len(),
                requested: spec.count,
                attempts,
            });
        }
        attempts += 1;
        let r = if rmax > rmin { rng.random_range(rmin..rmax) } else { rmin };
        let cand = PoreDisk {
            cx: rng.random_range(x0..x1),
            cy: rng.random_range(y0..y1),
            r,
        };
        if pores.iter().any(|q| cand.gap(q) < spec.min_gap) {
            continue;
        }
        if !wall.contains(cand.center()) || dist.distance(cand.center()) - r < spec.min_gap {
            continue;
        }
        pores.push(cand);
    }
    Ok(PorousGeometry { wall, pores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel() -> OuterWall {
        OuterWall::new(42.0, 2.6, 8).unwrap()
    }

    #[test]
    fn rejects_bad_walls() {
        assert!(OuterWall::new(-1.0, 1.0, 8).is_err());
        assert!(OuterWall::new(1.0, 0.0, 8).is_err());
        assert!(OuterWall::new(1.0, 1.0, 7).is_err());
        assert!(OuterWall::new(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn wall_bounding_box_and_midpoints() {
        let wall = channel();
        let pts = wall.parameterization().sample(4096);
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (_, c) in &pts {
            xmin = xmin.min(c.point[0]);
            xmax = xmax.max(c.point[0]);
            ymin = ymin.min(c.point[1]);
            ymax = ymax.max(c.point[1]);
        }
        assert!((-1e-12..1e-3).contains(&xmin), "{xmin}");
        assert!(xmax <= 42.0 + 1e-12 && xmax > 42.0 - 1e-3, "{xmax}");
        assert!((ymax - 2.6).abs() < 1e-3 * 2.6 && (ymin + 2.6).abs() < 1e-3 * 2.6);
        let top = wall.eval(0.5 * PI).point;
        assert!((top[1] - 2.6).abs() < 1e-3 * 2.6);
        assert!((top[0] - 21.0).abs() < 1e-12);
    }

    #[test]
    fn wall_perimeter_is_shorter_than_rectangle() {
        let per = channel().parameterization().perimeter();
        assert!(per < 94.4, "{per}");
        assert!(per > 2.0 * 42.0, "{per}");
    }

    #[test]
    fn wall_points_satisfy_level_set() {
        let wall = channel();
        for (_, c) in wall.parameterization().sample(257) {
            assert!((wall.level(c.point) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arclength_samples_are_equispaced() {
        let wall = OuterWall::new(6.0, 1.0, 8).unwrap();
        let param = wall.parameterization();
        let n = 512;
        let h = param.perimeter() / n as f64;
        let pts = param.sample(n);
        for j in 0..n {
            let a = pts[j].1.point;
            let b = pts[(j + 1) % n].1.point;
            let chord = (a[0] - b[0]).hypot(a[1] - b[1]);
            assert!(chord <= h * (1.0 + 1e-12) && chord > 0.99 * h);
        }
    }

    #[test]
    fn theta_trapezoid_perimeter_converges_spectrally() {
        let wall = OuterWall::new(6.0, 1.0, 8).unwrap();
        let exact = wall.parameterization().perimeter();
        let trap = |n: usize| {
            let h = 2.0 * PI / n as f64;
            (0..n).map(|j| wall.eval(j as f64 * h).speed()).sum::<f64>() * h
        };
        let e128 = (trap(128) - exact).abs();
        let e256 = (trap(256) - exact).abs();
        assert!(e256 < 1e-2 * e128 || e256 < 1e-13 * exact, "{e128} {e256}");
    }

    #[test]
    fn circle_perimeter() {
        let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 128).unwrap();
        let total: f64 = disc.ds.iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn discretize_counts() {
        let wall = channel();
        let geom = PorousGeometry::new(
            wall,
            vec![
                PoreDisk { cx: 5.0, cy: 0.0, r: 0.2 },
                PoreDisk { cx: 6.0, cy: 1.0, r: 0.1 },
            ],
        )
        .unwrap();
        let disc = discretize(&geom, 128, 2048).unwrap();
        assert_eq!(disc.len(), 2 * 128 + 2048);
        assert_eq!(disc.bodies.len(), 3);
        assert_eq!(disc.bodies[2].kind, BodyKind::Wall);
        assert_eq!(disc.bodies[2].range, 256..2304);
        let wall_sum: f64 = disc.ds[256..].iter().sum();
        let per = wall.parameterization().perimeter();
        assert!((wall_sum - per).abs() < 1e-10 * per);
        for n in &disc.normals {
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
        }
        assert!(discretize(&geom, 15, 2048).is_err());
        assert!(discretize(&geom, 128, 17).is_err());
    }

    #[test]
    fn wall_only_discretization() {
        let geom = PorousGeometry::new(channel(), vec![]).unwrap();
        let disc = discretize(&geom, 128, 256).unwrap();
        assert_eq!(disc.len(), 256);
        assert_eq!(disc.bodies.len(), 1);
    }

    #[test]
    fn wall_normals_point_outward() {
        let geom = PorousGeometry::new(OuterWall::new(4.0, 1.0, 8).unwrap(), vec![]).unwrap();
        let disc = discretize(&geom, 16, 256).unwrap();
        for (p, n) in disc.points.iter().zip(&disc.normals) {
            let inside = [p[0] - 1e-3 * n[0], p[1] - 1e-3 * n[1]];
            let outside = [p[0] + 1e-3 * n[0], p[1] + 1e-3 * n[1]];
            assert!(geom.wall.contains(inside) && !geom.wall.contains(outside));
        }
    }

    #[test]
    fn classify_examples() {
        let geom = PorousGeometry::new(
            OuterWall::new(10.0, 3.0, 8).unwrap(),
            vec![
                PoreDisk { cx: 4.0, cy: 0.0, r: 1.0 },
                PoreDisk { cx: 7.0, cy: 0.0, r: 1.0 },
            ],
        )
        .unwrap();
        let c = geom.classify_point([4.0, 0.0]);
        assert_eq!(c.class, PointClass::Pore(0));
        assert!((c.distance - 1.0).abs() < 1e-15);
        assert_eq!(geom.classify_point([100.0, 50.0]).class, PointClass::Exterior);
        assert_eq!(geom.classify_point([5.5, 2.0]).class, PointClass::Interior);
        assert!((geom.min_pore_gap().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wall_distance_matches_flat_segment() {
        let wall = channel();
        let dist = WallDistance::new(wall);
        assert!((dist.distance([21.0, 2.0]) - 0.6).abs() < 1e-9);
        assert!((dist.distance([21.0, -2.5]) - 0.1).abs() < 1e-9);
        assert!((dist.distance([21.0, 3.0]) - 0.4).abs() < 1e-9);
    }

    #[test]
    fn invalid_geometry_rejected() {
        let wall = OuterWall::new(10.0, 1.0, 8).unwrap();
        let overlap = vec![
            PoreDisk { cx: 4.0, cy: 0.0, r: 0.5 },
            PoreDisk { cx: 4.8, cy: 0.0, r: 0.5 },
        ];
        assert!(PorousGeometry::new(wall, overlap).is_err());
        let poking = vec![PoreDisk { cx: 4.0, cy: 0.8, r: 0.5 }];
        assert!(PorousGeometry::new(wall, poking).is_err());
    }

    #[test]
    fn packing_respects_constraints() {
        let spec = PackingSpec {
            outer: channel(),
            count: 22,
            radius_range: [6.4e-2, 2.5e-1],
            min_gap: 0.05,
            region: Some([0.5, 3.0, -2.2, 2.2]),
            max_attempts: None,
        };
        let geom = random_packing(&spec, 7).unwrap();
        assert_eq!(geom.pores.len(), 22);
        for p in &geom.pores {
            assert!(p.r >= 6.4e-2 && p.r <= 2.5e-1);
            assert!(p.cx >= 0.5 && p.cx <= 3.0);
        }
        assert!(geom.min_pore_gap().unwrap() >= 0.05);
        assert!(geom.min_wall_gap().unwrap() >= 0.05 - 1e-9);
        geom.validate().unwrap();
        assert_eq!(geom, random_packing(&spec, 7).unwrap());
    }

    #[test]
    fn packing_fails_when_infeasible() {
        let spec = PackingSpec {
            outer: OuterWall::new(1.0, 0.5, 8).unwrap(),
            count: 50,
            radius_range: [0.2, 0.2],
            min_gap: 0.01,
            region: None,
            max_attempts: Some(2000),
        };
        assert!(matches!(random_packing(&spec, 1), Err(Error::PackingFailed { .. })));
    }

    #[test]
    fn empty_packing() {
        let spec = PackingSpec {
            outer: channel(),
            count: 0,
            radius_range: [0.1, 0.2],
            min_gap: 0.01,
            region: None,
            max_attempts: None,
        };
        assert!(random_packing(&spec, 3).unwrap().pores.is_empty());
    }

    #[test]
    fn geometry_json_format() {
        let geom = PorousGeometry::new(channel(), vec![PoreDisk { cx: 2.0, cy: 0.5, r: 0.1 }]).unwrap();
        let text = serde_json::to_string(&geom).unwrap();
        assert_eq!(
            text,
            r#"{"outer":{"L":42.0,"H":2.6,"p":8},"pores":[{"cx":2.0,"cy":0.5,"r":0.1}]}"#
        );
        let back: PorousGeometry = serde_json::from_str(&text).unwrap();
        assert_eq!(back, geom);
    }
}
