//! Sparse goal-difference reward plus a dense game-state-EPV shaping term.
//!
//! Defenders want the attacking team's game-state EPV to be low, so the
//! EPV enters with a negative sign: additively (`r − w·E_t`) or as the
//! potential `Φ = −E` (`r + w·(γ·Φ(s') − Φ(s))`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::StepEvents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingMode {
    Additive,
    PotentialBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub shaping_weight: f64,
    pub mode: ShapingMode,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            shaping_weight: 0.1,
            mode: ShapingMode::Additive,
            gamma: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shaping_weight.is_finite() && self.shaping_weight >= 0.0) {
            return Err(Error::config("reward.shaping_weight", "must be finite and non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("reward.gamma", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Same configuration with shaping switched off.
    pub fn baseline(self) -> Self {
        RewardConfig {
            shaping_weight: 0.0,
            ..self
        }
    }
}

/// −1 when the attackers score, 0 otherwise.
pub fn sparse_reward(events: &StepEvents) -> f64 {
    if events.goal {
        -1.0
    } else {
        0.0
    }
}

pub fn shaped_reward(sparse: f64, epv_prev: f64, epv_curr: f64, config: &RewardConfig) -> f64 {
    let w = config.shaping_weight;
    match config.mode {
        ShapingMode::Additive => sparse - w * epv_curr,
        ShapingMode::PotentialBased => sparse + w * (config.gamma * (-epv_curr) - (-epv_prev)),
    }
}
