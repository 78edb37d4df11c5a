use std::path::Path;

use serde::{Deserialize, Serialize};

use super::QNetwork;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub layer_shapes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Serialized learner state: per-agent online networks plus the experiment
/// configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: serde_json::Value,
    pub seed: u64,
    pub agents: Vec<AgentParams>,
    pub training_step: u64,
}

impl Checkpoint {
    pub fn new(config: serde_json::Value, seed: u64, nets: &[QNetwork], training_step: u64) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            seed,
            agents: nets
                .iter()
                .map(|n| AgentParams {
                    layer_shapes: n.layer_shapes().to_vec(),
                    params: n.params().to_vec(),
                })
                .collect(),
            training_step,
        }
    }

    pub fn networks(&self) -> Result<Vec<QNetwork>> {
        if self.agents.is_empty() {
            return Err(Error::CheckpointFormat("checkpoint holds no agents".into()));
        }
        self.agents
            .iter()
            .map(|a| {
                QNetwork::from_parts(a.layer_shapes.clone(), a.params.clone())
                    .map_err(|e| Error::CheckpointFormat(e.to_string()))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::CheckpointFormat(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::CheckpointFormat(format!("{}: {e}", path.display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointFormat(format!("unsupported checkpoint version {}", ck.version)));
        }
        ck.networks()?;
        Ok(ck)
    }
}
