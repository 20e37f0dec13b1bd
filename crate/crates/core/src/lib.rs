//! Joint synchronization and placement of a distributed SDN controller.
//!
//! A single focal controller decides, every step, which neighbor domains to
//! pull fresh state from (under a hard per-step budget) and, every `tau`
//! steps, which candidate switch in its own domain should host it. The
//! decision is learned with double deep Q-learning over a concatenated
//! staleness / placement-age state, and compared against round-robin and
//! randomized schedules.
//!
//! Module map:
//!
//! * [`netmodel`]: multi-domain topology, its stochastic evolution, shortest paths.
//! * [`knowledge`]: the focal controller's stale snapshots of neighbor domains.
//! * [`envcore`]: the joint MDP (action space, budget and `tau` gating, rewards).
//! * [`apps`]: shortest-path routing and load-balancing sync rewards.
//! * [`agent`]: MLP Q-network, Adam, replay buffer, double-Q training loop.
//! * [`baselines`]: round robin and randomized policies.
//! * [`harness`]: configuration, seeding, experiments, sweeps and CSV output.

pub mod agent;
pub mod apps;
pub mod baselines;
pub mod envcore;
pub mod harness;
pub mod knowledge;
pub mod netmodel;
pub mod policy;
pub mod record;
pub mod seeding;

pub use envcore::{ActionSpace, EnvConfig, Environment, JointAction, JointState, StepOutcome};
pub use netmodel::{Domain, Link, NodeId, Topology};
