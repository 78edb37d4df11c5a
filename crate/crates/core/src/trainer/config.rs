use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pitch_control::PassModelParams;
use crate::reward::{RewardConfig, ShapingMode};
use crate::sim::ScenarioConfig;
use crate::vdn::TrainConfig;

/// Where the EPV grid comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpvSource {
    /// Solve the synthetic possession chain for the scenario's pitch.
    DefaultChain,
    /// Load a saved EPV grid file.
    File { path: PathBuf },
}

/// Everything that defines one experiment: scenario, reward, learner, and
/// the evaluation protocol, across a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Environment steps between greedy evaluations.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Difficulties for the final evaluation.
    pub eval_difficulties: Vec<f64>,
    /// Recompute the control field every this many steps, holding it in between.
    pub field_stride: u64,
    /// Steps between intermediate checkpoints; none when absent.
    pub checkpoint_every: Option<u64>,
    pub scenario: ScenarioConfig,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub pass_model: PassModelParams,
    pub epv_source: EpvSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![1, 2, 3],
            eval_every: 2000,
            eval_episodes: 32,
            eval_difficulties: vec![0.95, 0.6, 0.05],
            field_stride: 1,
            checkpoint_every: None,
            scenario: ScenarioConfig::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            pass_model: PassModelParams::default(),
            epv_source: EpvSource::DefaultChain,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.eval_episodes < 1 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        if self.eval_every < 1 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.field_stride < 1 {
            return Err(Error::config("field_stride", "must be at least 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::config("checkpoint_every", "must be at least 1"));
        }
        if let Some(d) = self.eval_difficulties.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::config("eval_difficulties", format!("{d} outside [0, 1]")));
        }
        self.scenario.validate()?;
        self.reward.validate()?;
        self.train.validate()?;
        self.pass_model.validate()?;
        if self.reward.mode == ShapingMode::PotentialBased && self.reward.gamma != self.train.gamma {
            return Err(Error::config(
                "reward.gamma",
                "must equal train.gamma when shaping is potential-based",
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a TOML experiment file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(format!("{}: {field}", path.display()), reason),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Short content hash of the configuration, ignoring the seed list.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..6])
    }

    /// Difficulties evaluated at the end of training: the training difficulty first.
    pub fn final_difficulties(&self) -> Vec<f64> {
        let mut ds = vec![self.scenario.difficulty];
        for d in &self.eval_difficulties {
            if !ds.contains(d) {
                ds.push(*d);
            }
        }
        ds
    }
}
