//! Experiment configuration: TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bench::BenchConfig;
use crate::agents::{BaselineKind, DdpgConfig};
use crate::error::{Error, Result};
use crate::sim::{MobilityConfig, Scenario};
use crate::tpsa::TpsaOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    GreedyTpsa,
    RandomTpsa,
    Ddpg,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Greedy => "greedy",
            PolicyKind::GreedyTpsa => "greedy_tpsa",
            PolicyKind::RandomTpsa => "random_tpsa",
            PolicyKind::Ddpg => "ddpg",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PolicyKind::Greedy => Some(BaselineKind::Greedy),
            PolicyKind::GreedyTpsa => Some(BaselineKind::GreedyTpsa),
            PolicyKind::RandomTpsa => Some(BaselineKind::RandomTpsa),
            PolicyKind::Ddpg => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    /// Full-width actor and critic instead of the shrunk desk widths.
    pub paper_shapes: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Also write a checkpoint every this many episodes (0 = only at the end).
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub policy: PolicyKind,
    pub seeds: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Greedy,
            seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Task arrivals per vehicle per second.
    pub arrival_rates: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    /// Evaluation episodes per (rate, policy).
    pub seeds: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            arrival_rates: vec![0.05, 0.1, 0.15, 0.2],
            policies: vec![PolicyKind::Greedy, PolicyKind::GreedyTpsa, PolicyKind::RandomTpsa],
            seeds: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    /// Directory holding `actor.ckpt` for the learned policy.
    pub checkpoint: Option<PathBuf>,
    pub scenario: Scenario,
    pub tpsa: TpsaOptions,
    pub nn: NnConfig,
    pub ddpg: DdpgConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateConfig,
    pub compare: CompareConfig,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            checkpoint: None,
            scenario: Scenario::default(),
            tpsa: TpsaOptions::default(),
            nn: NnConfig::default(),
            ddpg: DdpgConfig::default(),
            train: TrainConfig::default(),
            evaluate: EvaluateConfig::default(),
            compare: CompareConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn parse_override(item: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), value))
}

/// Sets `path` inside `root`, creating intermediate tables.
fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{}` crosses a non-table", path.join("."))))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path` (defaults when `None`), applies `key=value` overrides and
    /// validates. Relative paths inside the file resolve against its folder.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                if !p.exists() {
                    return Err(Error::MissingFile(p.to_path_buf()));
                }
                let text = std::fs::read_to_string(p)?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = parse_override(item)?;
            set_path(&mut table, &key, value)?;
        }
        let mut cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(base) = path.and_then(Path::parent) {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let MobilityConfig::Trace { path } = &mut self.scenario.traffic.mobility {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(c) = &mut self.checkpoint {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.ddpg.validate()?;
        self.bench.validate()?;
        if self.compare.arrival_rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Config("arrival rates must be non-negative".into()));
        }
        if self.compare.seeds == 0 || self.evaluate.seeds == 0 {
            return Err(Error::Config("need at least one evaluation seed".into()));
        }
        Ok(())
    }

    /// Agent settings with the width toggle applied.
    pub fn agent_config(&self) -> DdpgConfig {
        DdpgConfig {
            paper_shapes: self.nn.paper_shapes,
            ..self.ddpg.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `count` seeds drawn from a generator keyed by `(master, stream)`.
pub fn derive_seeds(master: u64, stream: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    (0..count).map(|_| rng.random::<u32>() as u64).collect()
}

pub mod streams {
    pub const TRAIN: u64 = 1;
    pub const EVALUATE: u64 = 2;
    pub const COMPARE: u64 = 3;
    pub const AGENT: u64 = 4;
    pub const POLICY: u64 = 5;
}
