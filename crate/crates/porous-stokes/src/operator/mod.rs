//! The discrete single-layer operator `A` and its dense and FMM realizations.

pub mod basis;
mod dense;
mod fmm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryDiscretization;

pub use basis::{LevelBasis, NestedBasis};
pub use dense::{assemble_block, assemble_dense, quadrature_weight, DenseOperator, DENSE_GUARD};
pub use fmm::{CorrectionMatrix, FmmOperator, FmmOptions, PointFmm};

/// A square linear map on `R^dim`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = A x` without dimension checks.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    /// Registered operator name, `"fmm"` or `"dense"` by default.
    pub kind: String,
    /// Chebyshev nodes per direction.
    pub n: usize,
    /// Tree depth; derived from the leaf population when absent.
    pub levels: Option<usize>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { kind: "fmm".into(), n: 10, levels: None }
    }
}

pub type OperatorBuilder = fn(&BoundaryDiscretization, &OperatorConfig) -> Result<Box<dyn LinearOperator>>;

/// Name-indexed operator constructors.
pub struct OperatorRegistry {
    entries: BTreeMap<String, OperatorBuilder>,
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        let mut reg = Self { entries: BTreeMap::new() };
        reg.register("dense", |disc, _| Ok(Box::new(assemble_dense(disc)?)));
        reg.register("fmm", |disc, cfg| {
            let opts = FmmOptions { n: cfg.n, levels: cfg.levels, ..FmmOptions::default() };
            Ok(Box::new(FmmOperator::new(disc, &opts)?))
        });
        reg
    }
}

impl OperatorRegistry {
    pub fn register(&mut self, name: &str, builder: OperatorBuilder) {
        self.entries.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, disc: &BoundaryDiscretization, cfg: &OperatorConfig) -> Result<Box<dyn LinearOperator>> {
        let builder = self
            .entries
            .get(&cfg.kind)
            .ok_or_else(|| Error::UnknownStrategy { kind: "operator", name: cfg.kind.clone() })?;
        builder(disc, cfg)
    }
}
