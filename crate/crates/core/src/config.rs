//! JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Partition, PartitionConfig, Protocol, Reservoir};
use crate::quadrature::check_grid;

pub const DEFAULT_GRID: usize = 2048;

/// Integrated totals that may be requested under `outputs`.
pub const OUTPUT_QUANTITIES: &[&str] = &["dU", "dS", "dN", "W", "power", "nonlocal", "W_ext", "dOmega"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `mu`, `T`, or a non-driven protocol parameter.
    pub parameter: String,
    pub values: Vec<f64>,
}

/// One protocol, or two for path comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProtocolSet {
    One(Protocol),
    Many(Vec<Protocol>),
}

impl ProtocolSet {
    pub fn as_slice(&self) -> &[Protocol] {
        match self {
            ProtocolSet::One(p) => std::slice::from_ref(p),
            ProtocolSet::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub partition: PartitionConfig,
    pub reservoir: Reservoir,
    pub protocol: ProtocolSet,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

/// A validated single-protocol experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub model: ModelSpec,
    pub partition: Partition,
    pub reservoir: Reservoir,
    pub protocol: Protocol,
    pub grid: usize,
}

impl Experiment {
    pub fn new(
        model: ModelSpec,
        partition: Partition,
        reservoir: Reservoir,
        protocol: Protocol,
        grid: usize,
    ) -> Result<Self> {
        check_grid(grid)?;
        protocol.check_covers(&model)?;
        if partition.dim() != model.dim() {
            return Err(Error::Config(format!(
                "partition covers {} sites, model has {}",
                partition.dim(),
                model.dim()
            )));
        }
        Ok(Experiment { model, partition, reservoir, protocol, grid })
    }

    pub fn with_grid(&self, grid: usize) -> Result<Self> {
        check_grid(grid)?;
        Ok(Experiment { grid, ..self.clone() })
    }

    /// Label whose work rate enters the mechanical advantage.
    pub fn drive_label(&self) -> &str {
        &self.partition.labels()[0]
    }

    /// Copy with `name` set to `value`: `mu` and `T` address the reservoir,
    /// anything else pins a non-driven protocol parameter.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match name {
            "mu" => out.reservoir = self.reservoir.with_mu(value)?,
            "T" => out.reservoir = self.reservoir.with_temperature(value)?,
            _ if !self.model.parameter_names().contains(name) => {
                return Err(Error::Config(format!("model has no parameter `{name}` to sweep")));
            }
            _ => out.protocol = self.protocol.with_fixed(name, value)?,
        }
        Ok(out)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(self.grid)?;
        let protocols = self.protocol.as_slice();
        if protocols.is_empty() || protocols.len() > 2 {
            return Err(Error::Config(format!("expected one or two protocols, got {}", protocols.len())));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
            if let Some(v) = sw.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
        }
        if let Some(q) = self.outputs.iter().find(|q| !OUTPUT_QUANTITIES.contains(&q.as_str())) {
            return Err(Error::Config(format!(
                "unknown output `{q}`; expected one of {}",
                OUTPUT_QUANTITIES.join(", ")
            )));
        }
        for exp in self.experiments()? {
            if let Some(sw) = &self.sweep {
                exp.with_parameter(&sw.parameter, sw.values[0])?;
            }
        }
        Ok(())
    }

    /// One experiment per protocol.
    pub fn experiments(&self) -> Result<Vec<Experiment>> {
        let partition = Partition::from_config(&self.model, &self.partition)?;
        self.protocol
            .as_slice()
            .iter()
            .map(|p| Experiment::new(self.model.clone(), partition.clone(), self.reservoir, p.clone(), self.grid))
            .collect()
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let mut all = self.experiments()?;
        if all.len() != 1 {
            return Err(Error::Config(format!("expected a single protocol, got {}", all.len())));
        }
        Ok(all.remove(0))
    }

    /// Requested totals, or all of them.
    pub fn output_quantities(&self) -> Vec<String> {
        if self.outputs.is_empty() {
            OUTPUT_QUANTITIES.iter().map(|s| s.to_string()).collect()
        } else {
            self.outputs.clone()
        }
    }
}
