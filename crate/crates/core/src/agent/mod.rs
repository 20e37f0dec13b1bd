//! The learning agent: Q-network, optimizer, replay memory and the double
//! DQN update built from them.

pub mod adam;
pub mod checkpoint;
pub mod dqn;
pub mod mlp;
pub mod replay;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use dqn::{exploration_probability, soft_update, td_targets, AgentConfig, DqnAgent};
pub use mlp::{Dense, Mlp};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("state has {got} features, network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite loss or gradient in episode {episode} after {update} updates; try a smaller learning_rate")]
    NonFinite { episode: u64, update: u64 },
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}
