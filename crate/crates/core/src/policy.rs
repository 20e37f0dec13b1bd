//! The decision-maker interface shared by the learning agent and the
//! baselines, and the episode loop that drives it.

use thiserror::Error;

use crate::agent::AgentError;
use crate::envcore::{EnvError, Environment};
use crate::record::{EpisodeRecord, EpisodeStats, Phase};

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

pub trait Policy {
    /// Flat index of the joint action to take in `env`'s current state.
    fn act(&mut self, env: &Environment, state: &[f64]) -> usize;

    /// Called after every step with the encoded transition.
    fn observe(&mut self, _state: &[f64], _action: usize, _reward: f64, _next: &[f64]) -> Result<(), AgentError> {
        Ok(())
    }

    /// Probability of a uniformly random action in the current episode.
    fn exploration_probability(&self) -> f64 {
        0.0
    }
}

/// Resets `env` and runs one episode of `env.config().horizon` steps.
pub fn run_episode(
    env: &mut Environment,
    policy: &mut dyn Policy,
    episode: u64,
    phase: Phase,
) -> Result<EpisodeRecord, RolloutError> {
    let cap = env.config().staleness_cap;
    let mut state = env.reset().encode(cap);
    let mut stats = EpisodeStats::default();
    for _ in 0..env.config().horizon {
        let action = policy.act(env, &state);
        let out = env.step_index(action)?;
        let next = out.next_state.encode(cap);
        policy.observe(&state, action, out.r_total, &next)?;
        stats.push(&out);
        state = next;
    }
    Ok(stats.finish(episode, phase, policy.exploration_probability()))
}
