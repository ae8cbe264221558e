use std::fs;
use std::path::Path;

use porous_stokes::field::{ErrorStats, FieldGrid};
use porous_stokes::geometry::{discretize, BodyKind, BoundaryDiscretization, GeometryStats, PorousGeometry};
use porous_stokes::kernel::{boundary_data, BoundaryCondition};
use porous_stokes::operator::{LinearOperator, OperatorConfig, OperatorRegistry};
use porous_stokes::solver::{solve, PreconditionerRegistry, SolveReport, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::config::{write_json, ScenarioConfig};
use crate::error::{BenchError, Result, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEntry {
    /// File tag of this entry: the preconditioner name, suffixed when repeated.
    pub tag: String,
    pub config: SolverConfig,
    pub report: SolveReport,
    pub field: Option<ErrorStats>,
    /// `max |sigma|` over pore unknowns divided by the same over the wall.
    pub pore_density_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub label: Option<String>,
    pub bc: BoundaryCondition,
    pub geometry: GeometryStats,
    pub geometry_seed: Option<u64>,
    pub points: usize,
    pub unknowns: usize,
    pub n_int: usize,
    pub n_ext: usize,
    pub operator: OperatorConfig,
    pub solvers: Vec<SolverEntry>,
}

#[derive(Serialize)]
struct ResidualRow {
    iter: usize,
    residual: f64,
}

#[derive(Serialize)]
struct DensityRow {
    index: usize,
    body: usize,
    kind: &'static str,
    x: f64,
    y: f64,
    sx: f64,
    sy: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let err = |source| BenchError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: path.into(), source })
}

fn tags(solvers: &[SolverConfig]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(solvers.len());
    for s in solvers {
        let seen = out.iter().filter(|t| t.split('_').next() == Some(s.precond.as_str())).count();
        out.push(if seen == 0 { s.precond.clone() } else { format!("{}_{}", s.precond, seen + 1) });
    }
    out
}

pub fn pore_density_ratio(disc: &BoundaryDiscretization, sigma: &[f64]) -> f64 {
    let (mut pore, mut wall) = (0.0f64, 0.0f64);
    for body in &disc.bodies {
        let m = sigma[2 * body.range.start..2 * body.range.end].iter().fold(0.0f64, |a, b| a.max(b.abs()));
        match body.kind {
            BodyKind::Pore(_) => pore = pore.max(m),
            BodyKind::Wall => wall = wall.max(m),
        }
    }
    pore / wall
}

struct Solved {
    sigma: Vec<f64>,
    report: SolveReport,
}

fn solve_entry(
    disc: &BoundaryDiscretization,
    op: &dyn LinearOperator,
    f: &[f64],
    cfg: &SolverConfig,
) -> Result<Solved> {
    let (sigma, report) = solve(disc, op, f, cfg, &PreconditionerRegistry::default()).stage("solve")?;
    Ok(Solved { sigma, report })
}

/// Solves one scenario with every configured solver and writes the artifacts.
pub fn run(cfg: &ScenarioConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let geom: PorousGeometry = cfg.geometry.load()?;
    let sc = &cfg.scenario;
    let disc = discretize(&geom, sc.n_int, sc.n_ext).stage("discretize")?;
    let bc = sc.boundary_condition(&geom);
    let f = boundary_data(&disc, &bc);
    let operators = OperatorRegistry::default();
    let solved: Vec<Solved> = if sc.parallel && cfg.solvers.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .solvers
                .iter()
                .map(|solver| {
                    let (disc, f, operators) = (&disc, &f, &operators);
                    s.spawn(move || {
                        let op = operators.build(disc, &sc.operator).stage("operator")?;
                        solve_entry(disc, op.as_ref(), f, solver)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread")).collect::<Result<Vec<_>>>()
        })?
    } else {
        let op = operators.build(&disc, &sc.operator).stage("operator")?;
        cfg.solvers.iter().map(|s| solve_entry(&disc, op.as_ref(), &f, s)).collect::<Result<_>>()?
    };

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|source| BenchError::Io { path: out.clone(), source })?;
    let mut entries = Vec::with_capacity(solved.len());
    for ((tag, solver), s) in tags(&cfg.solvers).into_iter().zip(&cfg.solvers).zip(solved) {
        let history = s.report.history.iter().enumerate().map(|(iter, &residual)| ResidualRow { iter, residual });
        write_csv(&out.join(format!("residuals_{tag}.csv")), history)?;
        let density = disc.points.iter().enumerate().map(|(i, p)| {
            let body = disc.body_of[i];
            DensityRow {
                index: i,
                body,
                kind: match disc.bodies[body].kind {
                    BodyKind::Pore(_) => "pore",
                    BodyKind::Wall => "wall",
                },
                x: p[0],
                y: p[1],
                sx: s.sigma[2 * i],
                sy: s.sigma[2 * i + 1],
            }
        });
        write_csv(&out.join(format!("density_{tag}.csv")), density)?;
        let field = match &sc.grid {
            Some(spec) => {
                let mut grid = FieldGrid::new(&geom, &disc, spec).stage("field")?;
                grid.evaluate(&disc, &s.sigma, &bc, sc.operator.n).stage("field")?;
                write_csv(&out.join(format!("field_{tag}.csv")), grid.rows())?;
                grid.stats()
            }
            None => None,
        };
        entries.push(SolverEntry {
            tag,
            config: solver.clone(),
            pore_density_ratio: pore_density_ratio(&disc, &s.sigma),
            report: s.report,
            field,
        });
    }
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        label: sc.label.clone(),
        bc,
        geometry: geom.stats(),
        geometry_seed: cfg.geometry.seed(),
        points: disc.len(),
        unknowns: disc.unknowns(),
        n_int: sc.n_int,
        n_ext: sc.n_ext,
        operator: sc.operator.clone(),
        solvers: entries,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
