//! Non-learning schedules used as reference points.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::envcore::{Environment, JointAction};
use crate::policy::Policy;

/// Round robin at step `t`: the `budget` neighbors following those synced
/// at `t - 1` (cyclically), and the next candidate site at every placement
/// epoch, starting from `initial_site` at `t = 0`.
pub fn round_robin_action(
    t: u64,
    num_neighbors: usize,
    budget: usize,
    num_sites: usize,
    initial_site: usize,
    tau: u64,
) -> JointAction {
    let start = ((t as u128 * budget as u128) % num_neighbors as u128) as usize;
    let mut sync_set: Vec<usize> = (0..budget).map(|j| (start + j) % num_neighbors).collect();
    sync_set.sort_unstable();
    let epoch = t / tau;
    let place_site = ((initial_site as u64 + epoch) % num_sites as u64) as usize;
    JointAction { sync_set, place_site }
}

/// A uniformly random `budget`-subset; a uniformly random site at placement
/// epochs, otherwise `current_site` (which the environment would keep anyway).
pub fn random_action(
    rng: &mut impl Rng,
    num_neighbors: usize,
    budget: usize,
    num_sites: usize,
    current_site: usize,
    placement_due: bool,
) -> JointAction {
    let mut sync_set = index::sample(rng, num_neighbors, budget).into_vec();
    sync_set.sort_unstable();
    let place_site = if placement_due {
        rng.gen_range(0..num_sites)
    } else {
        current_site
    };
    JointAction { sync_set, place_site }
}

#[derive(Debug, Clone, Default)]
pub struct RoundRobin;

impl Policy for RoundRobin {
    fn act(&mut self, env: &Environment, _state: &[f64]) -> usize {
        let space = env.action_space();
        let initial = env
            .candidate_sites()
            .iter()
            .position(|&s| s == env.initial_topology().focal().controller_site)
            .unwrap_or(0);
        let a = round_robin_action(
            env.t(),
            space.num_neighbors(),
            space.budget(),
            space.num_sites(),
            initial,
            env.config().tau,
        );
        space.index_of(&a).expect("round robin builds valid actions")
    }
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: crate::seeding::rng_from(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, env: &Environment, _state: &[f64]) -> usize {
        let space = env.action_space();
        let a = random_action(
            &mut self.rng,
            space.num_neighbors(),
            space.budget(),
            space.num_sites(),
            env.site_index(),
            env.placement_due(),
        );
        space.index_of(&a).expect("random policy builds valid actions")
    }
}
