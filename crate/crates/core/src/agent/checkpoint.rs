use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dqn::{AgentConfig, DqnAgent};
use super::mlp::Mlp;
use super::replay::ReplayBuffer;
use super::AgentError;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializable agent state. The replay buffer is not saved; a restored
/// agent refills it before its next update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub episode: u64,
    pub config: AgentConfig,
    pub main: Mlp,
    pub target: Mlp,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn capture(agent: &DqnAgent) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            layer_sizes: agent.main.sizes(),
            episode: agent.episode,
            config: agent.cfg.clone(),
            main: agent.main.clone(),
            target: agent.target.clone(),
            adam: agent.adam.clone(),
            rng: agent.rng.clone(),
        }
    }

    pub fn restore(self) -> Result<DqnAgent, AgentError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(AgentError::Version {
                found: self.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        self.config.validate()?;
        if self.main.sizes() != self.layer_sizes || self.target.sizes() != self.layer_sizes {
            return Err(AgentError::Config("checkpoint network shapes disagree with layer_sizes".into()));
        }
        let mut agent = DqnAgent::new(
            self.layer_sizes[0],
            self.layer_sizes[self.layer_sizes.len() - 1],
            self.config.clone(),
            0,
            0,
        )?;
        agent.main = self.main;
        agent.target = self.target;
        agent.adam = self.adam;
        agent.rng = self.rng;
        agent.episode = self.episode;
        agent.replay = ReplayBuffer::new(self.config.replay_capacity);
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
