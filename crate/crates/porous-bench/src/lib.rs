//! Scenario runner: configuration files, solves with several
//! preconditioners, result summaries and comparison tables.

pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use compare::{compare, load_summaries, render, write_table, TableRow};
pub use config::{BcKind, GeometrySource, Scenario, ScenarioConfig, SolverList};
pub use error::{BenchError, Result};
pub use run::{run, RunSummary, SolverEntry};

use std::path::Path;

use porous_stokes::geometry::{random_packing, PackingSpec};

/// Packs a geometry from `spec` and writes it as JSON.
pub fn gen_geometry(spec: &PackingSpec, seed: u64, out: &Path) -> Result<()> {
    let geom = random_packing(spec, seed).map_err(|source| BenchError::Stage { stage: "geometry", source })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.into(), source })?;
    }
    config::write_json(out, &geom)
}
