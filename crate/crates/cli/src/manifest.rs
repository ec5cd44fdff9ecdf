//! One JSON manifest per invocation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub corpus_fingerprint: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<PathBuf>,
    /// Seconds since the Unix epoch. Timestamps appear nowhere else.
    pub started_at: u64,
    pub finished_at: u64,
    pub deterministic: bool,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        let seeds = BTreeMap::from([
            ("corpus".to_string(), config.corpus.seed),
            ("train".to_string(), config.train.seed),
            ("eval_items".to_string(), config.eval.item_seed),
            ("shuffle".to_string(), config.shuffle.seed),
        ]);
        RunManifest {
            subcommand: subcommand.to_string(),
            argv: std::env::args().collect(),
            config: config.clone(),
            corpus_fingerprint: None,
            checkpoint: None,
            seeds,
            artifacts: Vec::new(),
            started_at: unix_now(),
            finished_at: 0,
            deterministic: std::env::var("HITEA_DETERMINISTIC").is_ok_and(|v| v == "1"),
        }
    }

    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}.manifest.json")
    }

    /// Writes `<out_dir>/<subcommand>.manifest.json` and returns its path.
    pub fn write(mut self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        self.finished_at = unix_now();
        std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let path = out_dir.join(Self::file_name(&self.subcommand));
        std::fs::write(&path, serde_json::to_vec_pretty(&self)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
