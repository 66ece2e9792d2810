use std::path::PathBuf;

use random_means::{GridSpec, MeanExpr, RandomMeanSpec, SimConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_REPLICATES: usize = 2_000;
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rho,
    Expectation,
    Slln,
    Clt,
    PowerLimit,
    LimitLaw,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rho => "rho",
            Command::Expectation => "expectation",
            Command::Slln => "slln",
            Command::Clt => "clt",
            Command::PowerLimit => "power-limit",
            Command::LimitLaw => "limit-law",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMethod {
    #[default]
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Simulation block of a config file; everything except the grid has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub n_schedule: Option<Vec<usize>>,
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Random mean for every command except `rho`.
    #[serde(default)]
    pub spec: Option<RandomMeanSpec>,
    /// The two means compared by `rho`.
    #[serde(default)]
    pub means: Option<Vec<MeanExpr>>,
    pub sim: SimSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub method: ExpectationMethod,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

/// Command-line overrides, echoed in every summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) -> random_means::Result<()> {
        if let Some(s) = o.seed {
            self.sim.seed = s;
        }
        if let Some(g) = o.grid {
            self.sim.grid = self.sim.grid.with_points(g)?;
        }
        if let Some(n) = o.n {
            self.sim.n = n;
        }
        if let Some(r) = o.replicates {
            self.sim.replicates = r;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.sim.seed,
            grid: self.sim.grid.clone(),
            n: self.sim.n,
            replicates: self.sim.replicates,
            n_schedule: self.sim.n_schedule.clone(),
        }
    }
}
