//! GMRES driver and the preconditioner suite.

mod gmres;
mod precond;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::BoundaryDiscretization;
use crate::ifmm::{IfmmConfig, IfmmStats};
use crate::operator::LinearOperator;

pub use gmres::{gmres, residual_report, GmresOptions, GmresOutcome};
pub use precond::{
    BlockDiagonal, DenseLu, Identity, IfmmPreconditioner, Preconditioner, PreconditionerBuilder,
    PreconditionerRegistry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Registered preconditioner name: `none`, `bd` or `ifmm`.
    pub precond: String,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: Option<usize>,
    pub ifmm: IfmmConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { precond: "none".into(), tol: 1e-8, max_iter: 1000, restart: None, ifmm: IfmmConfig::default() }
    }
}

impl SolverConfig {
    pub fn gmres_options(&self) -> GmresOptions {
        GmresOptions { tol: self.tol, max_iter: self.max_iter, restart: self.restart }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub precond: String,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    /// `||P^{-1} f - P^{-1} A x|| / ||P^{-1} f||`, recomputed after the solve.
    pub preconditioned_residual: f64,
    /// `||f - A x|| / ||f||`.
    pub actual_residual: f64,
    pub build_seconds: f64,
    pub gmres_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ifmm: Option<IfmmStats>,
}

/// Builds the configured preconditioner and runs GMRES with it.
pub fn solve(
    disc: &BoundaryDiscretization,
    a: &dyn LinearOperator,
    f: &[f64],
    cfg: &SolverConfig,
    registry: &PreconditionerRegistry,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let pc = registry.build(disc, cfg)?;
    let build_seconds = start.elapsed().as_secs_f64();
    solve_with(a, pc.as_ref(), f, cfg, build_seconds)
}

pub fn solve_with(
    a: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    f: &[f64],
    cfg: &SolverConfig,
    build_seconds: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    let out = gmres(a, pc, f, &cfg.gmres_options())?;
    let (pre, actual) = residual_report(a, pc, f, &out.x)?;
    let report = SolveReport {
        precond: pc.name().to_string(),
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
        preconditioned_residual: pre,
        actual_residual: actual,
        build_seconds,
        gmres_seconds: out.seconds,
        ifmm: pc.ifmm_stats().cloned(),
    };
    Ok((out.x, report))
}
