use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::read_json;
use crate::error::{BenchError, Result};
use crate::run::RunSummary;

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub run: String,
    pub precond: String,
    pub iterations: usize,
    pub converged: bool,
    pub total_seconds: f64,
    pub build_seconds: f64,
    pub gmres_seconds: f64,
    /// `||P^-1 f - P^-1 A x|| / ||P^-1 f||`
    pub preconditioned_residual: f64,
    /// `||f - A x|| / ||f||`
    pub actual_residual: f64,
}

pub fn load_summaries(dirs: &[PathBuf]) -> Result<Vec<(String, RunSummary)>> {
    dirs.iter()
        .map(|d| {
            let s: RunSummary = read_json(&d.join("summary.json"))?;
            let name = s.label.clone().unwrap_or_else(|| d.display().to_string());
            Ok((name, s))
        })
        .collect()
}

pub fn compare(summaries: &[(String, RunSummary)]) -> Result<Vec<TableRow>> {
    if summaries.is_empty() {
        return Err(BenchError::Config("compare needs at least one summary".into()));
    }
    Ok(summaries
        .iter()
        .flat_map(|(name, s)| {
            s.solvers.iter().map(move |e| TableRow {
                run: name.clone(),
                precond: e.tag.clone(),
                iterations: e.report.iterations,
                converged: e.report.converged,
                total_seconds: e.report.build_seconds + e.report.gmres_seconds,
                build_seconds: e.report.build_seconds,
                gmres_seconds: e.report.gmres_seconds,
                preconditioned_residual: e.report.preconditioned_residual,
                actual_residual: e.report.actual_residual,
            })
        })
        .collect())
}

pub fn render(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<8} {:>6} {:>26} {:>16} {:>12}",
        "run", "precond", "iter", "time [s] (build + gmres)", "|P^-1 r|/|P^-1 f|", "|r|/|f|"
    );
    for r in rows {
        let time = format!("{:.2} ({:.2} + {:.2})", r.total_seconds, r.build_seconds, r.gmres_seconds);
        let iter = if r.converged { r.iterations.to_string() } else { format!("{}*", r.iterations) };
        let _ = writeln!(
            out,
            "{:<24} {:<8} {:>6} {:>26} {:>16.2e} {:>12.2e}",
            r.run, r.precond, iter, time, r.preconditioned_residual, r.actual_residual
        );
    }
    out
}

pub fn write_table(path: &Path, rows: &[TableRow]) -> Result<()> {
    let err = |source| BenchError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: path.into(), source })
}
