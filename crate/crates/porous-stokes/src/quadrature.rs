//! Trapezoid rule with sixth-order Kapur-Rokhlin end corrections for
//! logarithmically singular periodic integrands.

use crate::error::{Error, Result};
use crate::geometry::BoundaryDiscretization;

/// Correction weights for offsets 1..=6 (applied symmetrically to -1..=-6).
pub const KR6_GAMMA: [f64; 6] = [
    4.967362978287758,
    -16.20501504859126,
    25.85153761832639,
    -22.22599466791883,
    9.930104998037539,
    -1.817995878141594,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrCorrection {
    pub gamma: [f64; 6],
}

pub fn kr6_corrections() -> KrCorrection {
    KrCorrection { gamma: KR6_GAMMA }
}

impl KrCorrection {
    /// Correction at a signed offset from the singular node; zero outside the stencil.
    pub fn weight(&self, offset: i64) -> f64 {
        match offset.unsigned_abs() {
            l @ 1..=6 => self.gamma[l as usize - 1],
            _ => 0.0,
        }
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        (-6..=6).filter(|l| *l != 0)
    }

    /// Corrected trapezoid sum of `f` sampled at `n` equispaced nodes with
    /// spacing `h`, singular at node `i`.
    pub fn integrate_periodic(&self, n: usize, h: f64, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                sum += f(j);
            }
        }
        for l in self.offsets() {
            let j = (i as i64 + l).rem_euclid(n as i64) as usize;
            sum += self.weight(l) * f(j);
        }
        h * sum
    }
}

/// Sparse description of the quadrature weights in one row of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub target: usize,
    /// `(j, gamma * ds_j)` added to the base weight `ds_j`.
    pub corrections: Vec<(usize, f64)>,
}

impl WeightRow {
    /// Full weight `w_j`: zero at the target, corrected on the stencil, `ds_j` elsewhere.
    pub fn weight(&self, disc: &BoundaryDiscretization, j: usize) -> f64 {
        if j == self.target {
            return 0.0;
        }
        disc.ds[j]
            + self
                .corrections
                .iter()
                .filter(|(k, _)| *k == j)
                .map(|(_, w)| w)
                .sum::<f64>()
    }
}

pub fn weight_row(disc: &BoundaryDiscretization, i: usize) -> Result<WeightRow> {
    if i >= disc.len() {
        return Err(Error::IndexOutOfRange { index: i, len: disc.len() });
    }
    Ok(WeightRow {
        target: i,
        corrections: stencil(disc, i).collect(),
    })
}

/// Stencil of `(j, gamma * ds_j)` around `i` on the curve containing `i`.
pub fn stencil(disc: &BoundaryDiscretization, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let body = &disc.bodies[disc.body_of[i]];
    let n = body.len() as i64;
    let local = (i - body.range.start) as i64;
    let kr = kr6_corrections();
    kr.offsets().map(move |l| {
        let j = body.range.start + (local + l).rem_euclid(n) as usize;
        (j, kr.weight(l) * disc.ds[j])
    })
}
