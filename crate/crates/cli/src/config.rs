//! Layered run configuration: built-in defaults, then an optional TOML file,
//! then command-line flags.

use std::path::Path;

use anyhow::Context;
use hitea::corpus::CorpusSpec;
use hitea::evaluation::EvalConfig;
use hitea::model::ModelConfig;
use hitea::training::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShuffleConfig {
    pub num_shuffles: usize,
    pub seed: u64,
}

impl Default for ShuffleConfig {
    fn default() -> Self {
        ShuffleConfig {
            num_shuffles: 3,
            seed: 0,
        }
    }
}

/// Everything a subcommand may read. The resolved value is stored verbatim in
/// the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub corpus: CorpusSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub shuffle: ShuffleConfig,
}

/// Error raised for configuration mistakes; mapped to the usage exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Recursively overlays `top` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn load(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let file: toml::Value = toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(RunConfig::default())?;
    merge(&mut merged, serde_json::to_value(file)?);
    serde_json::from_value(merged).map_err(|e| usage(format!("config {}: {e}", path.display())))
}
