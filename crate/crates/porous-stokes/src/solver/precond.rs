use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, LUFactorized, ReciprocalConditionNum, Solve};

use crate::error::{Error, Result};
use crate::geometry::BoundaryDiscretization;
use crate::ifmm::{self, IfmmFactorization, IfmmStats};
use crate::operator::assemble_block;

use super::SolverConfig;

/// Approximate inverse applied from the left.
pub trait Preconditioner: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;

    fn ifmm_stats(&self) -> Option<&IfmmStats> {
        None
    }
}

pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Preconditioner for Identity {
    fn name(&self) -> &str {
        "none"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check(self.dim, r)?;
        Ok(r.to_vec())
    }
}

fn check(dim: usize, r: &[f64]) -> Result<()> {
    if r.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
    }
    Ok(())
}

fn factor_checked(a: Array2<f64>, body: usize) -> Result<LUFactorized<ndarray::OwnedRepr<f64>>> {
    let lu = a
        .factorize_into()
        .map_err(|e| Error::SingularBlock { body, reason: e.to_string() })?;
    let rc = lu.rcond().map_err(|e| Error::SingularBlock { body, reason: e.to_string() })?;
    if !(rc >= f64::EPSILON) {
        return Err(Error::SingularBlock { body, reason: format!("reciprocal condition {rc:.3e}") });
    }
    Ok(lu)
}

/// Exact inverses of the self-interaction blocks of every body.
pub struct BlockDiagonal {
    dim: usize,
    blocks: Vec<(std::ops::Range<usize>, LUFactorized<ndarray::OwnedRepr<f64>>)>,
}

impl BlockDiagonal {
    pub fn new(disc: &BoundaryDiscretization) -> Result<Self> {
        let blocks = disc
            .bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let idx: Vec<usize> = body.range.clone().collect();
                let lu = factor_checked(assemble_block(disc, &idx, &idx), b)?;
                Ok((2 * body.range.start..2 * body.range.end, lu))
            })
            .collect::<Result<_>>()?;
        Ok(Self { dim: disc.unknowns(), blocks })
    }

    pub fn body_count(&self) -> usize {
        self.blocks.len()
    }
}

impl Preconditioner for BlockDiagonal {
    fn name(&self) -> &str {
        "bd"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check(self.dim, r)?;
        let mut out = vec![0.0; self.dim];
        for (range, lu) in &self.blocks {
            let x = lu.solve_into(Array1::from(r[range.clone()].to_vec()))?;
            out[range.clone()].copy_from_slice(x.as_slice().expect("contiguous"));
        }
        Ok(out)
    }
}

/// Dense LU of the whole matrix, for verification on small systems.
pub struct DenseLu {
    dim: usize,
    lu: LUFactorized<ndarray::OwnedRepr<f64>>,
}

impl DenseLu {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        Ok(Self { dim, lu: factor_checked(matrix, 0)? })
    }
}

impl Preconditioner for DenseLu {
    fn name(&self) -> &str {
        "lu"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check(self.dim, r)?;
        Ok(self.lu.solve_into(Array1::from(r.to_vec()))?.to_vec())
    }
}

pub struct IfmmPreconditioner {
    pub factorization: IfmmFactorization,
}

impl Preconditioner for IfmmPreconditioner {
    fn name(&self) -> &str {
        "ifmm"
    }

    fn dim(&self) -> usize {
        use crate::operator::LinearOperator;
        self.factorization.dim()
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.factorization.apply_inverse(r)
    }

    fn ifmm_stats(&self) -> Option<&IfmmStats> {
        Some(&self.factorization.stats)
    }
}

pub type PreconditionerBuilder = fn(&BoundaryDiscretization, &SolverConfig) -> Result<Box<dyn Preconditioner>>;

/// Name-indexed preconditioner constructors.
pub struct PreconditionerRegistry {
    entries: BTreeMap<String, PreconditionerBuilder>,
}

impl Default for PreconditionerRegistry {
    fn default() -> Self {
        let mut reg = Self { entries: BTreeMap::new() };
        reg.register("none", |disc, _| Ok(Box::new(Identity::new(disc.unknowns()))));
        reg.register("bd", |disc, _| Ok(Box::new(BlockDiagonal::new(disc)?)));
        reg.register("ifmm", |disc, cfg| {
            Ok(Box::new(IfmmPreconditioner { factorization: ifmm::factorize(disc, &cfg.ifmm)? }))
        });
        reg
    }
}

impl PreconditionerRegistry {
    pub fn register(&mut self, name: &str, builder: PreconditionerBuilder) {
        self.entries.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, disc: &BoundaryDiscretization, cfg: &SolverConfig) -> Result<Box<dyn Preconditioner>> {
        let builder = self
            .entries
            .get(&cfg.precond)
            .ok_or_else(|| Error::UnknownStrategy { kind: "preconditioner", name: cfg.precond.clone() })?;
        builder(disc, cfg)
    }
}
