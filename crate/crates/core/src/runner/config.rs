//! Experiment configuration: TOML schema, validation with defaults, and
//! scenario assembly inputs.

use crate::cache::TopologySpec;
use crate::fairness::FairnessParams;
use crate::runner::presets::topology_preset;
use crate::trace::TraceConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ohf,
    Osf,
    Lru,
    Lfu,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolicyKind::Ohf => "ohf",
            PolicyKind::Osf => "osf",
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Resample costs and capacities from the master seed per the standard
    /// instance distribution.
    #[serde(default)]
    pub randomize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkToggles {
    #[serde(default)]
    pub hf: bool,
    #[serde(default)]
    pub sf: bool,
    #[serde(default)]
    pub utilitarian: bool,
    #[serde(default)]
    pub pareto: bool,
    #[serde(default = "default_pareto_grid")]
    pub pareto_grid: usize,
    #[serde(default = "default_solver_iters")]
    pub solver_iters: usize,
}

fn default_pareto_grid() -> usize {
    51
}
fn default_solver_iters() -> usize {
    10_000
}

impl Default for BenchmarkToggles {
    fn default() -> Self {
        Self {
            hf: false,
            sf: false,
            utilitarian: false,
            pareto: false,
            pareto_grid: default_pareto_grid(),
            solver_iters: default_solver_iters(),
        }
    }
}

impl BenchmarkToggles {
    pub fn any(&self) -> bool {
        self.hf || self.sf || self.utilitarian || self.pareto
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartState {
    /// Projection of the origin (repository-only state in cache scenarios).
    #[default]
    Origin,
    /// Uniform fractional fill of each cache's free capacity.
    Uniform,
}

fn default_horizon() -> usize {
    10_000
}
fn default_u_star_min() -> f64 {
    0.1
}
fn default_u_star_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub policy: PolicyKind,
    pub alpha: f64,
    #[serde(default = "default_u_star_min")]
    pub u_star_min: f64,
    #[serde(default = "default_u_star_max")]
    pub u_star_max: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub topology: Option<TopologyConfig>,
    pub traces: Vec<TraceConfig>,
    #[serde(default)]
    pub benchmarks: BenchmarkToggles,
    /// Weighted-fairness weights on the agent simplex.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Per-agent disagreement utilities (bargaining mode; requires
    /// alpha = 1 unless explicitly allowed).
    #[serde(default)]
    pub disagreement: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_non_nash_disagreement: bool,
    /// Override for the dual learning-rate constant `c` in `c / t`.
    #[serde(default)]
    pub dual_rate_constant: Option<f64>,
    #[serde(default)]
    pub start_state: StartState,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_synthetic(&self) -> bool {
        self.traces.first().map(|t| t.is_synthetic()).unwrap_or(false)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must be nonempty"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "an empty run (horizon = 0) is rejected"));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(invalid("alpha", "must be finite and >= 0"));
        }
        FairnessParams::new(self.alpha, self.u_star_min, self.u_star_max, 1)
            .map_err(|e| invalid("u_star_min/u_star_max", e.to_string()))?;
        if self.traces.is_empty() {
            return Err(invalid("traces", "at least one trace is required"));
        }
        for (i, t) in self.traces.iter().enumerate() {
            t.validate()
                .map_err(|e| invalid(&format!("traces[{i}]"), e.to_string()))?;
        }
        let synthetic = self.traces.iter().filter(|t| t.is_synthetic()).count();
        if synthetic > 0 {
            if self.traces.len() != 1 {
                return Err(invalid(
                    "traces",
                    "a synthetic adversary drives both agents; give exactly one trace",
                ));
            }
            if self.topology.is_some() {
                return Err(invalid(
                    "topology",
                    "synthetic adversaries define their own allocation set; remove [topology]",
                ));
            }
            if matches!(self.policy, PolicyKind::Lru | PolicyKind::Lfu) {
                return Err(invalid(
                    "policy",
                    "replication baselines need a cache topology",
                ));
            }
        } else {
            let topo = self
                .topology
                .as_ref()
                .ok_or_else(|| invalid("topology", "cache scenarios need [topology]"))?;
            match (&topo.preset, &topo.file) {
                (Some(_), Some(_)) => {
                    return Err(invalid("topology", "give either `preset` or `file`, not both"))
                }
                (None, None) => {
                    return Err(invalid("topology", "give `preset` or `file`"))
                }
                (Some(p), None) => {
                    topology_preset(p).map_err(|e| invalid("topology.preset", e.to_string()))?;
                }
                _ => {}
            }
            let catalogs: Vec<u32> = self.traces.iter().map(|t| t.catalog).collect();
            if catalogs.windows(2).any(|w| w[0] != w[1]) {
                return Err(invalid(
                    "traces",
                    "all traces must share one catalog size (the network's catalog)",
                ));
            }
        }
        if let Some(w) = &self.weights {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(invalid("weights", "must lie on the probability simplex"));
            }
            // w^(1/(1-alpha)) has a negative exponent for alpha > 1, so a
            // zero weight would blow the rescale up to infinity
            if self.alpha > 1.0 && w.iter().any(|&x| x == 0.0) {
                return Err(invalid(
                    "weights",
                    "zero weights are only meaningful at alpha <= 1",
                ));
            }
        }
        if self.disagreement.is_some() && self.alpha != 1.0 && !self.allow_non_nash_disagreement {
            return Err(invalid(
                "disagreement",
                "disagreement points define bargaining at alpha = 1; set \
                 allow_non_nash_disagreement = true to override",
            ));
        }
        if let Some(c) = self.dual_rate_constant {
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid("dual_rate_constant", "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Resolves the topology spec (preset or file), applying randomization.
    pub fn resolve_topology(&self) -> Result<Option<TopologySpec>, ConfigError> {
        let Some(topo) = &self.topology else {
            return Ok(None);
        };
        let mut spec = if let Some(name) = &topo.preset {
            topology_preset(name).map_err(|e| invalid("topology.preset", e.to_string()))?
        } else {
            let path = topo.file.as_ref().unwrap();
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            TopologySpec::from_toml(&text).map_err(|e| ConfigError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        };
        if topo.randomize {
            crate::runner::presets::randomize_instance(&mut spec, self.seed);
        }
        Ok(Some(spec))
    }

    /// Number of agents implied by the scenario.
    pub fn n_agents(&self) -> Result<usize, ConfigError> {
        if self.is_synthetic() {
            Ok(2)
        } else {
            Ok(self.resolve_topology()?.expect("validated").agents.len())
        }
    }

    pub fn catalog(&self) -> u32 {
        self.traces.first().map(|t| t.catalog).unwrap_or(20)
    }
}
