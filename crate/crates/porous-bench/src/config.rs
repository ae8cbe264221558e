use std::fs;
use std::path::{Path, PathBuf};

use porous_stokes::field::GridSpec;
use porous_stokes::geometry::{random_packing, PackingSpec, PorousGeometry};
use porous_stokes::kernel::BoundaryCondition;
use porous_stokes::operator::OperatorConfig;
use porous_stokes::presets::{DESK_N_EXT, DESK_N_INT};
use porous_stokes::solver::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result, StageExt};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| BenchError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(|source| BenchError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Shear,
    Pipe,
    StokesletRotlet,
}

fn default_k() -> f64 {
    1.0
}

fn default_n_int() -> usize {
    DESK_N_INT
}

fn default_n_ext() -> usize {
    DESK_N_EXT
}

fn default_operator() -> OperatorConfig {
    OperatorConfig { n: 15, ..OperatorConfig::default() }
}

/// Boundary condition, discretization and output options of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bc: BcKind,
    /// Pipe flow amplitude.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Seed of the random Stokeslet/rotlet strengths.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_int")]
    pub n_int: usize,
    #[serde(default = "default_n_ext")]
    pub n_ext: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_operator")]
    pub operator: OperatorConfig,
    /// Run solver entries on separate threads, each with its own operator.
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub label: Option<String>,
}

impl Scenario {
    pub fn new(bc: BcKind) -> Self {
        Self {
            bc,
            k: default_k(),
            seed: 0,
            n_int: default_n_int(),
            n_ext: default_n_ext(),
            grid: None,
            operator: default_operator(),
            parallel: false,
            label: None,
        }
    }

    pub fn boundary_condition(&self, geom: &PorousGeometry) -> BoundaryCondition {
        match self.bc {
            BcKind::Shear => BoundaryCondition::Shear,
            BcKind::Pipe => BoundaryCondition::Pipe { k: self.k, half_height: geom.wall.half_height },
            BcKind::StokesletRotlet => BoundaryCondition::random_stokeslet_rotlet(geom, self.seed),
        }
    }
}

/// A solver file holds one configuration or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolverList {
    One(SolverConfig),
    Many(Vec<SolverConfig>),
}

impl SolverList {
    pub fn into_vec(self) -> Vec<SolverConfig> {
        match self {
            SolverList::One(c) => vec![c],
            SolverList::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySource {
    File(PathBuf),
    Generate { spec: PackingSpec, seed: u64 },
    Inline(PorousGeometry),
}

impl GeometrySource {
    pub fn load(&self) -> Result<PorousGeometry> {
        let geom = match self {
            GeometrySource::File(p) => read_json(p)?,
            GeometrySource::Generate { spec, seed } => random_packing(spec, *seed).stage("geometry")?,
            GeometrySource::Inline(g) => g.clone(),
        };
        geom.validate().stage("geometry")?;
        Ok(geom)
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            GeometrySource::Generate { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: GeometrySource,
    pub scenario: Scenario,
    pub solvers: Vec<SolverConfig>,
    pub out_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(BenchError::Config("solver list is empty".into()));
        }
        if let GeometrySource::File(p) = &self.geometry {
            if !p.exists() {
                return Err(BenchError::Config(format!("geometry file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
