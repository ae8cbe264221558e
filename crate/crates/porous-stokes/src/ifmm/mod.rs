//! Inverse fast multipole method: an H2 approximation of `A`, its extended
//! sparse form and an approximate elimination that keeps the sparsity by
//! compressing well-separated fill-ins into the low-rank channels.

mod extended;
mod factor;
mod h2;

use serde::{Deserialize, Serialize};

pub use extended::ExtendedSystem;
pub use factor::{FactorOptions, IfmmFactorization, IfmmStats};
pub use h2::H2Matrix;

use crate::error::Result;
use crate::geometry::BoundaryDiscretization;
use crate::tree::DepthRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfmmConfig {
    /// Chebyshev nodes per direction for the initial bases.
    pub n: usize,
    /// Fill-in truncation tolerance, relative; also used for the initial bases.
    pub epsilon: f64,
    pub levels: Option<usize>,
    /// Depth rule: mean leaf population at most `leaf_factor * n^2`.
    pub leaf_factor: f64,
}

impl Default for IfmmConfig {
    fn default() -> Self {
        Self { n: 10, epsilon: 1e-7, levels: None, leaf_factor: 2.0 }
    }
}

impl IfmmConfig {
    pub fn depth_rule(&self) -> DepthRule {
        match self.levels {
            Some(d) => DepthRule::Fixed(d),
            None => DepthRule::MeanLeaf(self.leaf_factor * (self.n * self.n) as f64),
        }
    }
}

pub fn build_h2(disc: &BoundaryDiscretization, cfg: &IfmmConfig) -> Result<H2Matrix> {
    H2Matrix::new(disc, cfg.n, cfg.epsilon, cfg.depth_rule())
}

/// Builds the H2 matrix, its extended system and the factorization.
pub fn factorize(disc: &BoundaryDiscretization, cfg: &IfmmConfig) -> Result<IfmmFactorization> {
    let ext = ExtendedSystem::new(build_h2(disc, cfg)?);
    IfmmFactorization::new(&ext, &FactorOptions { epsilon: cfg.epsilon, ..FactorOptions::default() })
}
