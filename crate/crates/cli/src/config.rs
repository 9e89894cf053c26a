use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tlshm::frame::{DamageScenario, PerturbSpec, SimulationConfig};
use tlshm::harness::TrainSettings;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 1,000-sample records, 128-wide dense layers, 200 pretraining epochs.
    Desk,
    /// 5,000-sample records, 1,024-wide dense layers, 1,000 pretraining epochs.
    Full,
}

impl Profile {
    pub fn is_desk(self) -> bool {
        self == Profile::Desk
    }

    pub fn simulation(self) -> SimulationConfig {
        match self {
            Profile::Desk => SimulationConfig::desk(),
            Profile::Full => SimulationConfig::default(),
        }
    }

    pub fn pretrain_epochs(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Full => 1000,
        }
    }
}

/// Recursively overlays `top` onto `base`; objects merge key by key, any
/// other value replaces.
pub fn merge(base: Value, top: Value) -> Value {
    match (base, top) {
        (Value::Object(mut b), Value::Object(t)) => {
            for (k, v) in t {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, top) => top,
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Defaults overlaid with the optional config file, decoded into `T`.
/// Unknown or mistyped fields are reported with their path.
pub fn materialize<T: Serialize + DeserializeOwned>(defaults: &T, path: Option<&Path>) -> CliResult<(T, Value)> {
    let base = serde_json::to_value(defaults).expect("defaults serialize");
    let value = match path {
        Some(p) => merge(base, read_json(p)?),
        None => base,
    };
    let decoded: T = serde_json::from_value(value.clone()).map_err(|e| {
        let origin = path.map(|p| p.display().to_string()).unwrap_or_else(|| "defaults".into());
        CliError::config(format!("{origin}: {e}"))
    })?;
    Ok((decoded, value))
}

/// Document read by `simulate --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateFile {
    pub simulation: SimulationConfig,
    /// Explicit scenario list; `--table3` and `--surrogate-lab` override it.
    pub scenarios: Option<Vec<DamageScenario>>,
    /// Perturbation of the frame and measurement noise.
    pub perturbation: Option<PerturbSpec>,
    pub domain: String,
}

impl Default for SimulateFile {
    fn default() -> Self {
        Self { simulation: SimulationConfig::default(), scenarios: None, perturbation: None, domain: "simulation".into() }
    }
}

/// Document read by `pretrain --config` and `transfer --config`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub noise_fraction: f64,
    pub standardize: bool,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self { epochs: 300, batch_size: 32, lr: 1e-4, noise_fraction: 0.1, standardize: false }
    }
}

impl TrainFile {
    pub fn with_epochs(epochs: usize) -> Self {
        Self { epochs, ..Self::default() }
    }

    pub fn settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            noise_fraction: self.noise_fraction,
            standardize: self.standardize,
        }
    }
}
