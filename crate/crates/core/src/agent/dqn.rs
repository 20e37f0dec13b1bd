//! Double deep Q-learning: epsilon-greedy acting, replayed minibatch TD
//! updates with Adam, and soft target tracking.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::Mlp;
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::envcore::Environment;
use crate::policy::Policy;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    /// Denominator constant of the exploration schedule `1 / (1 + E / decay)`.
    pub epsilon_decay: f64,
    /// Target tracking rate `kappa`.
    pub soft_update: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub episodes: u64,
    pub use_double_q: bool,
    pub hidden_layers: Vec<usize>,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.01,
            batch_size: 256,
            gamma: 0.4,
            epsilon_decay: 10.0,
            soft_update: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            episodes: 300,
            use_double_q: true,
            hidden_layers: vec![128, 128],
            replay_capacity: 40_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |msg: String| Err(AgentError::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.epsilon_decay > 0.0) {
            return bad(format!("epsilon_decay must be > 0, got {}", self.epsilon_decay));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return bad(format!("soft_update must be in (0, 1], got {}", self.soft_update));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(format!("adam_epsilon must be > 0, got {}", self.adam_epsilon));
        }
        if self.episodes < 1 {
            return bad("episodes must be >= 1".into());
        }
        if self.hidden_layers.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return bad(format!(
                "replay_capacity {} is smaller than batch_size {}",
                self.replay_capacity, self.batch_size
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, state_dim: usize, num_actions: usize) -> Vec<usize> {
        let mut sizes = vec![state_dim];
        sizes.extend(&self.hidden_layers);
        sizes.push(num_actions);
        sizes
    }
}

/// `1 / (1 + episode / decay)`.
pub fn exploration_probability(episode: u64, decay: f64) -> f64 {
    1.0 / (1.0 + episode as f64 / decay)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn row_argmax(m: &Array2<f64>, row: usize) -> usize {
    let r = m.row(row);
    let mut best = 0;
    for i in 1..r.len() {
        if r[i] > r[best] {
            best = i;
        }
    }
    best
}

/// Bootstrapped targets for a batch. With double-Q the main network picks
/// the next action and the target network scores it; otherwise the target
/// network's own maximum is used. No terminal masking: episodes are
/// truncations of a continuing task.
pub fn td_targets(batch: &[&Transition], main: &Mlp, target: &Mlp, gamma: f64, use_double_q: bool) -> Vec<f64> {
    let next: Vec<&[f64]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
    let next = Mlp::rows(&next, target.input_dim());
    let q_target = target.forward_batch(next.view());
    let q_main = use_double_q.then(|| main.forward_batch(next.view()));
    batch
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let bootstrap = match &q_main {
                Some(q_main) => q_target[[j, row_argmax(q_main, j)]],
                None => q_target.row(j).iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            t.reward + gamma * bootstrap
        })
        .collect()
}

/// `target <- kappa * main + (1 - kappa) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, main: &Mlp, kappa: f64) {
    assert!(target.same_shape(main), "soft update needs identically shaped networks");
    for (t, m) in target.layers_mut().iter_mut().zip(main.layers()) {
        t.weights.zip_mut_with(&m.weights, |t, &m| *t = kappa * m + (1.0 - kappa) * *t);
        t.bias.zip_mut_with(&m.bias, |t, &m| *t = kappa * m + (1.0 - kappa) * *t);
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub(crate) cfg: AgentConfig,
    pub(crate) main: Mlp,
    pub(crate) target: Mlp,
    pub(crate) adam: Adam,
    pub(crate) replay: ReplayBuffer,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) episode: u64,
    training: bool,
    updates: u64,
}

impl DqnAgent {
    /// Main and target start from the same randomized parameters.
    pub fn new(state_dim: usize, num_actions: usize, cfg: AgentConfig, init_seed: u64, explore_seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let mut init_rng = seeding::rng_from(init_seed);
        let main = Mlp::new(&cfg.layer_sizes(state_dim, num_actions), &mut init_rng);
        let adam = Adam::new(&main, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
        Ok(DqnAgent {
            target: main.clone(),
            main,
            adam,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            rng: seeding::rng_from(explore_seed),
            episode: 0,
            training: true,
            updates: 0,
            cfg,
        })
    }

    pub fn for_env(env: &Environment, cfg: AgentConfig, init_seed: u64, explore_seed: u64) -> Result<Self, AgentError> {
        Self::new(env.state_dim(), env.action_space().len(), cfg, init_seed, explore_seed)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn main(&self) -> &Mlp {
        &self.main
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn gradient_updates(&self) -> u64 {
        self.updates
    }

    /// Starts episode `episode` (1-based) of training.
    pub fn begin_episode(&mut self, episode: u64) {
        self.episode = episode;
        self.training = true;
    }

    /// Switches to greedy acting without learning.
    pub fn freeze(&mut self) {
        self.training = false;
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.main.forward(state)
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize, AgentError> {
        Ok(argmax(&self.q_values(state)?))
    }

    /// Epsilon-greedy action for training episode `episode`.
    pub fn select_action(&mut self, state: &[f64], episode: u64) -> Result<usize, AgentError> {
        let p = exploration_probability(episode, self.cfg.epsilon_decay);
        if self.rng.gen::<f64>() < p {
            Ok(self.rng.gen_range(0..self.main.output_dim()))
        } else {
            self.greedy_action(state)
        }
    }

    pub fn remember(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// One Adam step on the mean squared TD error of `batch`; targets are
    /// computed once, before the gradient.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64, AgentError> {
        let y = td_targets(batch, &self.main, &self.target, self.cfg.gamma, self.cfg.use_double_q);
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let states = Mlp::rows(&states, self.main.input_dim());
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, grads) = self.main.td_loss_and_grad(states.view(), &actions, &y);
        if !loss.is_finite() || !grads.is_finite() {
            return Err(AgentError::NonFinite {
                episode: self.episode,
                update: self.updates,
            });
        }
        self.adam.update(&mut self.main, &grads);
        self.updates += 1;
        Ok(loss)
    }

    /// Samples a minibatch (once the buffer holds one), trains, then tracks
    /// the target. Returns the loss when an update happened.
    pub fn learn(&mut self) -> Result<Option<f64>, AgentError> {
        let b = self.cfg.batch_size;
        let Some(batch) = self.replay.sample(&mut self.rng, b) else {
            return Ok(None);
        };
        // sampling borrows the buffer; the batch is tiny next to the network
        let batch: Vec<Transition> = batch.into_iter().cloned().collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let loss = self.train_step(&refs)?;
        soft_update(&mut self.target, &self.main, self.cfg.soft_update);
        Ok(Some(loss))
    }
}

impl Policy for DqnAgent {
    fn act(&mut self, _env: &Environment, state: &[f64]) -> usize {
        let a = if self.training {
            self.select_action(state, self.episode)
        } else {
            self.greedy_action(state)
        };
        a.expect("state dimension is fixed by the environment")
    }

    fn observe(&mut self, state: &[f64], action: usize, reward: f64, next: &[f64]) -> Result<(), AgentError> {
        if !self.training {
            return Ok(());
        }
        self.remember(Transition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next.to_vec(),
        });
        self.learn()?;
        Ok(())
    }

    fn exploration_probability(&self) -> f64 {
        if self.training {
            exploration_probability(self.episode, self.cfg.epsilon_decay)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exploration_schedule() {
        assert_eq!(exploration_probability(0, 10.0), 1.0);
        assert_eq!(exploration_probability(10, 10.0), 0.5);
        assert!(exploration_probability(1000, 10.0) < 0.01);
        for e in 0..100 {
            assert!(exploration_probability(e + 1, 10.0) < exploration_probability(e, 10.0));
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.9, 0.9]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        assert_eq!(argmax(&[-3.0, -1.0, -2.0]), 1);
    }

    fn transition(reward: f64, next: Vec<f64>) -> Transition {
        Transition {
            state: vec![0.0; next.len()],
            action: 0,
            reward,
            next_state: next,
        }
    }

    #[test]
    fn double_q_target_substitution() {
        // main argmax at phi is action 1; the target scores action 1 at 2.0
        let main = Mlp::from_layers(vec![super::super::mlp::Dense {
            weights: ndarray::array![[0.0, 0.0]],
            bias: ndarray::array![0.0, 1.0],
        }]);
        let target = Mlp::from_layers(vec![super::super::mlp::Dense {
            weights: ndarray::array![[0.0, 0.0]],
            bias: ndarray::array![5.0, 2.0],
        }]);
        let t = transition(1.0, vec![0.3]);
        let y = td_targets(&[&t], &main, &target, 0.4, true);
        assert!((y[0] - 1.8).abs() < 1e-12);
        // vanilla max over the target: 1 + 0.4 * 5
        let y = td_targets(&[&t], &main, &target, 0.4, false);
        assert!((y[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn myopic_targets_are_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let main = Mlp::new(&[3, 6, 4], &mut rng);
        let target = Mlp::new(&[3, 6, 4], &mut rng);
        let batch: Vec<Transition> = (0..5).map(|i| transition(i as f64 * 0.7, vec![0.1 * i as f64, 0.2, -0.4])).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = td_targets(&refs, &main, &target, 0.0, true);
        assert_eq!(y, vec![0.0, 0.7, 1.4, 0.7 * 3.0, 2.8]);
    }

    #[test]
    fn identical_networks_make_double_and_max_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let main = Mlp::new(&[4, 16, 16, 6], &mut rng);
        let target = main.clone();
        let batch: Vec<Transition> = (0..32)
            .map(|_| transition(rng.gen(), (0..4).map(|_| rng.gen::<f64>()).collect()))
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        assert_eq!(
            td_targets(&refs, &main, &target, 0.9, true),
            td_targets(&refs, &main, &target, 0.9, false)
        );
    }

    #[test]
    fn soft_update_arithmetic() {
        let mut target = Mlp::zeros(&[2, 2]);
        let mut main = Mlp::zeros(&[2, 2]);
        main.set_params_flat(&[2.0; 6]);
        soft_update(&mut target, &main, 0.5);
        assert_eq!(target.params_flat(), vec![1.0; 6]);
        soft_update(&mut target, &main, 1.0);
        assert_eq!(target, main);
    }

    #[test]
    fn soft_update_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let main = Mlp::new(&[3, 4, 2], &mut rng);
        let mut target = main.clone();
        soft_update(&mut target, &main, 0.3);
        assert!(target.max_abs_diff(&main) <= 1e-15);
    }

    #[test]
    fn learning_waits_for_a_full_batch() {
        let cfg = AgentConfig {
            batch_size: 8,
            hidden_layers: vec![4],
            ..AgentConfig::default()
        };
        let mut agent = DqnAgent::new(2, 3, cfg, 1, 2).unwrap();
        let before = agent.main().clone();
        for i in 0..7 {
            agent.remember(transition(i as f64, vec![0.1, 0.2]));
            assert_eq!(agent.learn().unwrap(), None);
        }
        assert_eq!(agent.main(), &before);
        agent.remember(transition(1.0, vec![0.1, 0.2]));
        assert!(agent.learn().unwrap().is_some());
        assert_ne!(agent.main(), &before);
    }

    #[test]
    fn invalid_config() {
        let cfg = AgentConfig { gamma: 1.0, ..AgentConfig::default() };
        assert!(matches!(cfg.validate(), Err(AgentError::Config(_))));
        let cfg = AgentConfig { soft_update: 0.0, ..AgentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
