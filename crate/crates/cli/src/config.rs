//! Run configuration: TOML or JSON on disk, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symhom::dynamics::{Family, HamiltonianSpec, SampledGrid, Support};
use symhom::genfunc::LandscapeOptions;

use crate::census::CensusOptions;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Homogenize,
    Orbits,
    Measures,
    Subdiff,
    Census,
    Rset,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Homogenize => "homogenize",
            Task::Orbits => "orbits",
            Task::Measures => "measures",
            Task::Subdiff => "subdiff",
            Task::Census => "census",
            Task::Rset => "rset",
        }
    }
}

/// Optional overrides of the landscape construction defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeOverrides {
    pub nodes_x: Option<usize>,
    pub nodes_x_full: Option<usize>,
    pub fiber_nodes: Option<usize>,
    pub nodes_graph_y: Option<usize>,
    pub sweep_step: Option<f64>,
    pub cell_budget: Option<usize>,
}

impl LandscapeOverrides {
    pub fn apply(&self) -> LandscapeOptions {
        let mut o = LandscapeOptions::default();
        if let Some(v) = self.nodes_x {
            o.nodes_x = v;
        }
        if let Some(v) = self.nodes_x_full {
            o.nodes_x_full = v;
        }
        if let Some(v) = self.fiber_nodes {
            o.fiber_nodes = v;
        }
        if let Some(v) = self.nodes_graph_y {
            o.nodes_graph_y = v;
        }
        if let Some(v) = self.sweep_step {
            o.sweep_step = v;
        }
        if let Some(v) = self.cell_budget {
            o.cell_budget = v;
        }
        o
    }
}

fn default_p_min() -> f64 {
    -1.0
}
fn default_p_max() -> f64 {
    1.0
}
fn default_p_nodes() -> usize {
    33
}
fn default_alpha_samples() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_p_nodes")]
    pub p_nodes: usize,
    /// Slopes sampled per Clarke interval when emitting the rotation-action set.
    #[serde(default = "default_alpha_samples")]
    pub alpha_samples: usize,
    #[serde(default)]
    pub landscape: LandscapeOverrides,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            p_min: default_p_min(),
            p_max: default_p_max(),
            p_nodes: default_p_nodes(),
            alpha_samples: default_alpha_samples(),
            landscape: LandscapeOverrides::default(),
        }
    }
}

impl Grids {
    pub fn p_grid(&self) -> Vec<f64> {
        let n = self.p_nodes;
        (0..n).map(|i| self.p_min + (self.p_max - self.p_min) * i as f64 / (n - 1) as f64).collect()
    }
}

/// One requested invariant measure: momentum `p` and target rotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureRequest {
    pub p: f64,
    pub alphas: Vec<f64>,
    /// Rotations spanning the admissible hull; the requested rotations when absent.
    #[serde(default)]
    pub hull: Option<Vec<f64>>,
}

/// Where the Hamiltonian comes from: inline, or a TOML/JSON spec or `t,q,p,H` CSV grid on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianFile {
    pub path: PathBuf,
    /// Support radius for a CSV grid (the grid's momentum extent when absent).
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub hamiltonian_file: Option<HamiltonianFile>,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget_seconds: Option<u64>,
    /// Reuse landscapes stored under `<output_dir>/cache`.
    #[serde(default)]
    pub cache: bool,
    #[serde(default)]
    pub census: Option<CensusOptions>,
    #[serde(default)]
    pub measures: Vec<MeasureRequest>,
}

fn config_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`. Errors carry the offending field path.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| config_err(&e.path().to_string(), e.inner()))
        } else {
            let value: toml::Value = toml::from_str(text).map_err(|e| config_err("<root>", e.message()))?;
            serde_path_to_error::deserialize(value).map_err(|e| config_err(&e.path().to_string(), e.inner().message()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Resolves the Hamiltonian relative to `base` (the config file directory).
    pub fn resolve_hamiltonian(&self, base: &Path) -> Result<HamiltonianSpec, CliError> {
        let spec = match (&self.hamiltonian, &self.hamiltonian_file) {
            (Some(h), None) => h.clone(),
            (None, Some(f)) => {
                let path = if f.path.is_absolute() { f.path.clone() } else { base.join(&f.path) };
                let text = std::fs::read_to_string(&path).map_err(|e| config_err("hamiltonian_file.path", e))?;
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
                let parsed = match ext {
                    "json" => HamiltonianSpec::from_json(&text),
                    "csv" => SampledGrid::from_csv_str(&text).map(|g| {
                        let radius = f.radius.unwrap_or(g.p_max.abs().max(g.p_min.abs()));
                        let timed = g.nt > 1;
                        let mut h = HamiltonianSpec::new(Family::CustomGrid { grid: g }, Support::Compact { radius });
                        h.time_dependent = timed;
                        h
                    }),
                    _ => HamiltonianSpec::from_toml(&text),
                };
                parsed.map_err(|e| config_err("hamiltonian_file", e))?
            }
            (Some(_), Some(_)) => return Err(config_err("hamiltonian", "give either hamiltonian or hamiltonian_file")),
            (None, None) => return Err(config_err("hamiltonian", "missing")),
        };
        spec.validate().map_err(|e| config_err("hamiltonian", e))?;
        Ok(spec)
    }

    /// Checks the fields a task relies on.
    pub fn validate(&self, task: Task) -> Result<(), CliError> {
        let g = &self.grids;
        if g.p_nodes < 3 || !(g.p_max > g.p_min) {
            return Err(config_err("grids", "need p_nodes >= 3 and p_max > p_min"));
        }
        let needs_k = !matches!(task, Task::Census);
        if needs_k && self.k_list.is_empty() {
            return Err(config_err("k_list", "must be nonempty"));
        }
        if self.k_list.contains(&0) || self.k_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("k_list", "must be positive and strictly increasing"));
        }
        if task == Task::Measures && self.measures.is_empty() {
            return Err(config_err("measures", "at least one request is needed"));
        }
        for (i, m) in self.measures.iter().enumerate() {
            if m.alphas.is_empty() {
                return Err(config_err(&format!("measures[{i}].alphas"), "must be nonempty"));
            }
        }
        if let Some(c) = &self.census {
            if c.max_period == 0 || c.max_period > 64 {
                return Err(config_err("census.max_period", "must lie in 1..=64"));
            }
        }
        Ok(())
    }
}
