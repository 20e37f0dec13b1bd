//! The joint synchronization/placement MDP.
//!
//! One call to [`Environment::step`] runs, in order: placement (only when
//! `t % tau == 0`), the budgeted syncs, the application's sync reward on the
//! post-sync view, the placement reward, the multiplicative joint reward,
//! then world dynamics and aging.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{lb_loss, lb_reward, pair_universe, spr_detect, spr_reward, AppError, Application, LbOutcome, SprOutcome};
use crate::knowledge::{KnowledgeBase, KnowledgeError, DEFAULT_STALENESS_CAP};
use crate::netmodel::{step_dynamics, DynamicsConfig, Graph, NodeId, Topology, TopologyError};

pub const DEFAULT_ACTION_LIMIT: usize = 4096;

/// Versioned description of the flat action index convention.
pub const ACTION_ORDER: &str = "\
action-order v1: flat = subset_rank * num_sites + site.
subset_rank enumerates the budget-sized subsets of neighbor indices in
lexicographic order ({0,1} < {0,2} < ... < {n-2,n-1}); neighbor index i is
the i-th non-focal domain in ascending domain id. site indexes the focal
domain's candidate_sites list.";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid env config: {0}")]
    Config(String),
    #[error("sync budget violated: action syncs {got} neighbors, budget is exactly {budget}")]
    BudgetViolation { budget: usize, got: usize },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("action space of {size} joint actions exceeds the limit of {limit}; use fewer neighbors, a smaller budget or fewer candidate sites")]
    ActionSpaceTooLarge { size: u128, limit: usize },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    App(#[from] AppError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Fraction of neighbors that may be synced per step; `B_sync` is the ceiling.
    pub budget_fraction: f64,
    /// Placement is applied only at steps with `t % tau == 0`.
    pub tau: u64,
    /// Weight of the inter-controller term of the placement reward.
    pub mu: f64,
    /// Offset in `r_total = r_sync * (alpha + r_place)`.
    pub alpha: f64,
    /// Steps per episode.
    pub horizon: u64,
    pub staleness_cap: u64,
    /// Substituted for unreachable delays; defaults to ten times the
    /// all-links-up diameter of the initial topology.
    pub unreachable_delay: Option<f64>,
    pub max_actions: usize,
    pub own_domain_always_fresh: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            budget_fraction: 0.28,
            tau: 20,
            mu: 1.0,
            alpha: 2.0,
            horizon: 500,
            staleness_cap: DEFAULT_STALENESS_CAP,
            unreachable_delay: None,
            max_actions: DEFAULT_ACTION_LIMIT,
            own_domain_always_fresh: true,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::Config(msg));
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return bad(format!("budget_fraction must be in (0, 1], got {}", self.budget_fraction));
        }
        if self.tau < 1 {
            return bad("tau must be >= 1".into());
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if self.horizon < 1 {
            return bad("horizon must be >= 1".into());
        }
        if self.staleness_cap < 1 {
            return bad("staleness_cap must be >= 1".into());
        }
        if let Some(d) = self.unreachable_delay {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("unreachable_delay must be > 0, got {d}"));
            }
        }
        if !self.own_domain_always_fresh {
            return bad("own_domain_always_fresh = false is not supported".into());
        }
        Ok(())
    }

    /// `ceil(budget_fraction * neighbors)`, clamped into `[1, neighbors]`.
    pub fn sync_budget(&self, num_neighbors: usize) -> usize {
        let raw = (self.budget_fraction * num_neighbors as f64 - 1e-9).ceil() as usize;
        raw.clamp(1, num_neighbors.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    /// Ascending neighbor indices, exactly `B_sync` of them.
    pub sync_set: Vec<usize>,
    pub place_site: usize,
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set: Vec<String> = self.sync_set.iter().map(|i| i.to_string()).collect();
        write!(f, "sync={{{}}}, site={}", set.join(","), self.place_site)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic enumeration of the `k`-subsets of `0..n`.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// The fixed flat indexing of joint actions; see [`ACTION_ORDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    num_neighbors: usize,
    budget: usize,
    num_sites: usize,
    subsets: Vec<Vec<usize>>,
}

impl ActionSpace {
    pub fn new(num_neighbors: usize, budget: usize, num_sites: usize, limit: usize) -> Result<Self, EnvError> {
        if budget < 1 || budget > num_neighbors {
            return Err(EnvError::Config(format!(
                "sync budget must satisfy 1 <= B <= {num_neighbors}, got {budget}"
            )));
        }
        if num_sites < 1 {
            return Err(EnvError::Config("at least one candidate site is required".into()));
        }
        let size = binomial(num_neighbors, budget) * num_sites as u128;
        if size > limit as u128 {
            return Err(EnvError::ActionSpaceTooLarge { size, limit });
        }
        Ok(ActionSpace {
            num_neighbors,
            budget,
            num_sites,
            subsets: subsets(num_neighbors, budget),
        })
    }

    pub fn len(&self) -> usize {
        self.subsets.len() * self.num_sites
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_neighbors(&self) -> usize {
        self.num_neighbors
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn action(&self, index: usize) -> Option<JointAction> {
        let subset = self.subsets.get(index / self.num_sites)?;
        Some(JointAction {
            sync_set: subset.clone(),
            place_site: index % self.num_sites,
        })
    }

    pub fn index_of(&self, action: &JointAction) -> Option<usize> {
        if action.place_site >= self.num_sites {
            return None;
        }
        let rank = self.subsets.binary_search(&action.sync_set).ok()?;
        Some(rank * self.num_sites + action.place_site)
    }

    pub fn iter(&self) -> impl Iterator<Item = JointAction> + '_ {
        (0..self.len()).filter_map(|i| self.action(i))
    }

    /// One line per flat index, e.g. `0\tsync={0,1}, site=0`.
    pub fn describe(&self) -> String {
        self.iter()
            .enumerate()
            .map(|(i, a)| format!("{i}\t{a}\n"))
            .collect()
    }
}

/// All joint actions in canonical order, with the default size limit.
pub fn enumerate_actions(num_neighbors: usize, budget: usize, num_sites: usize) -> Result<Vec<JointAction>, EnvError> {
    let space = ActionSpace::new(num_neighbors, budget, num_sites, DEFAULT_ACTION_LIMIT)?;
    Ok(space.iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointState {
    /// Capped steps since each neighbor's last sync.
    pub sync_part: Vec<u64>,
    /// Age of the controller at its current site; zero for the other sites.
    pub place_part: Vec<u64>,
}

impl JointState {
    /// Concatenated vector with every entry divided by the staleness cap.
    pub fn encode(&self, cap: u64) -> Vec<f64> {
        let cap = cap as f64;
        self.sync_part
            .iter()
            .chain(&self.place_part)
            .map(|&v| v as f64 / cap)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppMetrics {
    pub spr: SprOutcome,
    /// `None` when the network has no servers.
    pub lb: Option<LbOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Step index at which the action was applied.
    pub t: u64,
    pub next_state: JointState,
    pub r_sync: f64,
    pub r_place: f64,
    pub r_total: f64,
    pub metrics: AppMetrics,
    pub placement_applied: bool,
    pub relocated: bool,
    pub controller_site: NodeId,
}

/// `(sum_e delay(c, e))^-1 + mu * (sum_n delay(c, n))^-1` over the focal
/// switches `e` and the synced neighbor controllers `n`. Unreachable delays
/// count as `unreachable_delay`; an empty (zero) sum contributes 0.
pub fn placement_reward(
    topology: &Topology,
    controller_site: NodeId,
    synced_controllers: &[NodeId],
    mu: f64,
    unreachable_delay: f64,
) -> f64 {
    let dist = Graph::live(topology).distances_from(controller_site.0);
    let delay = |n: NodeId| {
        let d = dist[n.0];
        if d.is_finite() {
            d
        } else {
            unreachable_delay
        }
    };
    let inverse = |sum: f64| if sum > 0.0 { 1.0 / sum } else { 0.0 };
    let intra: f64 = topology.focal().switches.iter().map(|&e| delay(e)).sum();
    let inter: f64 = synced_controllers.iter().map(|&c| delay(c)).sum();
    inverse(intra) + mu * inverse(inter)
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    app: Application,
    dynamics: DynamicsConfig,
    initial: Topology,
    truth: Topology,
    knowledge: KnowledgeBase,
    actions: ActionSpace,
    sites: Vec<NodeId>,
    initial_site: usize,
    site: usize,
    placement_age: u64,
    neighbor_controllers: Vec<NodeId>,
    pairs: Vec<(NodeId, NodeId)>,
    unreachable_delay: f64,
    t: u64,
    relocations: u64,
}

impl Environment {
    pub fn new(topology: Topology, cfg: EnvConfig, app: Application, dynamics: DynamicsConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        dynamics.validate()?;
        topology.validate()?;
        if let Application::Lb { capacity_reference } = app {
            if capacity_reference < dynamics.capacity_bounds[1] {
                return Err(EnvError::Config(format!(
                    "lb capacity_reference {capacity_reference} is below the capacity upper bound {}",
                    dynamics.capacity_bounds[1]
                )));
            }
            if topology.domains.iter().all(|d| d.servers.is_empty()) {
                return Err(AppError::NoServers.into());
            }
        }
        if let Application::Spr { k: Some(k) } = app {
            if !(k > 0.0 && k.is_finite()) {
                return Err(AppError::Config(format!("spr k must be > 0, got {k}")).into());
            }
        }
        let knowledge = KnowledgeBase::new(&topology, cfg.staleness_cap);
        let num_neighbors = knowledge.neighbors().len();
        let sites = topology.focal().candidate_sites.clone();
        let actions = ActionSpace::new(num_neighbors, cfg.sync_budget(num_neighbors), sites.len(), cfg.max_actions)?;
        let initial_site = sites
            .iter()
            .position(|&s| s == topology.focal().controller_site)
            .expect("validated topology has its controller among the candidates");
        let neighbor_controllers = knowledge
            .neighbors()
            .iter()
            .map(|&d| topology.domains[d].controller_site)
            .collect();
        let pairs = pair_universe(&topology);
        let unreachable_delay = cfg
            .unreachable_delay
            .unwrap_or_else(|| 10.0 * topology.diameter_all_up());
        Ok(Environment {
            cfg,
            app,
            dynamics,
            truth: topology.clone(),
            initial: topology,
            knowledge,
            actions,
            sites,
            initial_site,
            site: initial_site,
            placement_age: 0,
            neighbor_controllers,
            pairs,
            unreachable_delay,
            t: 0,
            relocations: 0,
        })
    }

    /// Sets the seed of the dynamics stream used from the next reset on.
    pub fn set_dynamics_seed(&mut self, seed: u64) {
        self.dynamics.rng_seed = seed;
    }

    /// Restores the initial topology with fresh snapshots and zero ages.
    pub fn reset(&mut self) -> JointState {
        self.truth = self.initial.clone();
        self.knowledge = KnowledgeBase::new(&self.truth, self.cfg.staleness_cap);
        self.site = self.initial_site;
        self.placement_age = 0;
        self.t = 0;
        self.relocations = 0;
        self.state()
    }

    pub fn state(&self) -> JointState {
        let mut place_part = vec![0; self.sites.len()];
        place_part[self.site] = self.placement_age.min(self.cfg.staleness_cap);
        JointState {
            sync_part: self.knowledge.staleness(),
            place_part,
        }
    }

    pub fn encoded_state(&self) -> Vec<f64> {
        self.state().encode(self.cfg.staleness_cap)
    }

    pub fn state_dim(&self) -> usize {
        self.actions.num_neighbors() + self.sites.len()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn application(&self) -> &Application {
        &self.app
    }

    pub fn dynamics(&self) -> &DynamicsConfig {
        &self.dynamics
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn budget(&self) -> usize {
        self.actions.budget()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn truth(&self) -> &Topology {
        &self.truth
    }

    pub fn initial_topology(&self) -> &Topology {
        &self.initial
    }

    pub fn knowledge(&self) -> &KnowledgeBase {
        &self.knowledge
    }

    pub fn site_index(&self) -> usize {
        self.site
    }

    pub fn controller_site(&self) -> NodeId {
        self.sites[self.site]
    }

    pub fn candidate_sites(&self) -> &[NodeId] {
        &self.sites
    }

    pub fn neighbor_controllers(&self) -> &[NodeId] {
        &self.neighbor_controllers
    }

    pub fn unreachable_delay(&self) -> f64 {
        self.unreachable_delay
    }

    pub fn relocations(&self) -> u64 {
        self.relocations
    }

    pub fn placement_due(&self) -> bool {
        self.t % self.cfg.tau == 0
    }

    fn check(&self, action: &JointAction) -> Result<(), EnvError> {
        let budget = self.actions.budget();
        if action.sync_set.len() != budget {
            return Err(EnvError::BudgetViolation {
                budget,
                got: action.sync_set.len(),
            });
        }
        if action.sync_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EnvError::InvalidAction(format!(
                "sync set must be strictly ascending, got {:?}",
                action.sync_set
            )));
        }
        if let Some(&i) = action.sync_set.iter().find(|&&i| i >= self.actions.num_neighbors()) {
            return Err(EnvError::InvalidAction(format!("neighbor index {i} out of range")));
        }
        if action.place_site >= self.sites.len() {
            return Err(EnvError::InvalidAction(format!(
                "site index {} out of range for {} candidate sites",
                action.place_site,
                self.sites.len()
            )));
        }
        Ok(())
    }

    pub fn step_index(&mut self, index: usize) -> Result<StepOutcome, EnvError> {
        let action = self
            .actions
            .action(index)
            .ok_or_else(|| EnvError::InvalidAction(format!("flat index {index} out of range")))?;
        self.step(&action)
    }

    pub fn step(&mut self, action: &JointAction) -> Result<StepOutcome, EnvError> {
        self.check(action)?;
        let t = self.t;

        let placement_applied = self.placement_due();
        let relocated = placement_applied && action.place_site != self.site;
        if relocated {
            self.site = action.place_site;
            self.placement_age = 0;
            self.relocations += 1;
        }

        for &i in &action.sync_set {
            self.knowledge.sync_index(&self.truth, i)?;
        }

        let perceived = self.knowledge.perceived_global_graph(&self.truth);
        let spr = spr_detect(&perceived, &self.truth, &self.pairs)?;
        let lb = match lb_loss(&perceived, &self.truth) {
            Ok(out) => Some(out),
            Err(AppError::NoServers) => None,
            Err(e) => return Err(e.into()),
        };
        let r_sync = match self.app {
            Application::Spr { k: Some(k) } => spr_reward(spr.detected, k),
            // k = 1 / evaluated pairs, i.e. the detection rate itself
            Application::Spr { k: None } => spr.rate,
            Application::Lb { capacity_reference } => {
                lb_reward(lb.ok_or(AppError::NoServers)?.loss, capacity_reference)
            }
        };

        let synced: Vec<NodeId> = action
            .sync_set
            .iter()
            .map(|&i| self.neighbor_controllers[i])
            .collect();
        let controller_site = self.controller_site();
        let r_place = placement_reward(&self.truth, controller_site, &synced, self.cfg.mu, self.unreachable_delay);
        let r_total = r_sync * (self.cfg.alpha + r_place);

        self.truth = step_dynamics(&self.truth, &self.dynamics, t);
        self.knowledge.advance();
        self.placement_age += 1;
        self.t += 1;

        Ok(StepOutcome {
            t,
            next_state: self.state(),
            r_sync,
            r_place,
            r_total,
            metrics: AppMetrics { spr, lb },
            placement_applied,
            relocated,
            controller_site,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{generate_topology, Domain, GenerationConfig, Link};
    use std::collections::BTreeMap;

    #[test]
    fn action_counts() {
        assert_eq!(enumerate_actions(6, 2, 10).unwrap().len(), 150);
        assert_eq!(enumerate_actions(1, 1, 1).unwrap().len(), 1);
        let all = enumerate_actions(6, 2, 10).unwrap();
        assert_eq!(all[0], JointAction { sync_set: vec![0, 1], place_site: 0 });
        assert_eq!(all[149], JointAction { sync_set: vec![4, 5], place_site: 9 });
        assert_eq!(all[1], JointAction { sync_set: vec![0, 1], place_site: 1 });
        assert_eq!(all[10], JointAction { sync_set: vec![0, 2], place_site: 0 });
    }

    #[test]
    fn action_space_limit() {
        // C(16, 8) = 12870 > 4096
        assert!(matches!(
            enumerate_actions(16, 8, 1),
            Err(EnvError::ActionSpaceTooLarge { size: 12870, .. })
        ));
        assert!(ActionSpace::new(4, 5, 1, 4096).is_err());
        assert!(ActionSpace::new(4, 2, 0, 4096).is_err());
    }

    #[test]
    fn index_round_trip() {
        let space = ActionSpace::new(5, 3, 4, 4096).unwrap();
        for (i, a) in space.iter().enumerate() {
            assert_eq!(space.index_of(&a), Some(i));
        }
        assert_eq!(space.index_of(&JointAction { sync_set: vec![0, 1], place_site: 0 }), None);
    }

    #[test]
    fn describe_small_space() {
        let space = ActionSpace::new(2, 1, 2, 4096).unwrap();
        let text = space.describe();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "0\tsync={0}, site=0");
        assert_eq!(lines[3], "3\tsync={1}, site=1");
    }

    #[test]
    fn budget_rounding() {
        let cfg = EnvConfig::default();
        assert_eq!(cfg.sync_budget(6), 2);
        assert_eq!(cfg.sync_budget(4), 2);
        assert_eq!(cfg.sync_budget(3), 1);
        let half = EnvConfig { budget_fraction: 0.5, ..EnvConfig::default() };
        assert_eq!(half.sync_budget(4), 2);
        let full = EnvConfig { budget_fraction: 1.0, ..EnvConfig::default() };
        assert_eq!(full.sync_budget(6), 6);
    }

    /// Focal domain {0, 1, 2} with the controller at 0, switch 1 at delay 1,
    /// switch 2 at delay 2; neighbor controller 3 at delay 4 from 0.
    pub(crate) fn placement_fixture() -> Topology {
        let dom = |id, sw: &[usize], site| Domain {
            id,
            switches: sw.iter().copied().map(NodeId).collect(),
            candidate_sites: sw.iter().copied().map(NodeId).collect(),
            controller_site: NodeId(site),
            servers: BTreeMap::from([(NodeId(site), 5.0)]),
        };
        Topology {
            nodes: (0..4).map(NodeId).collect(),
            links: vec![
                Link::new(NodeId(0), NodeId(1), 1.0),
                Link::new(NodeId(0), NodeId(2), 2.0),
                Link::new(NodeId(0), NodeId(3), 4.0),
            ],
            domains: vec![dom(0, &[0, 1, 2], 0), dom(1, &[3], 3)],
            focal_domain: 0,
        }
    }

    #[test]
    fn placement_reward_fixture() {
        let t = placement_fixture();
        let r = placement_reward(&t, NodeId(0), &[NodeId(3)], 1.0, 100.0);
        assert!((r - 7.0 / 12.0).abs() < 1e-12);
        let intra_only = placement_reward(&t, NodeId(0), &[NodeId(3)], 0.0, 100.0);
        assert!((intra_only - 1.0 / 3.0).abs() < 1e-12);
        // no synced neighbors: empty sum contributes nothing
        assert!((placement_reward(&t, NodeId(0), &[], 1.0, 100.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn placement_reward_prefers_dominating_site() {
        let t = placement_fixture();
        // site 0 is strictly closer than site 2 to switch 1 and to controller 3
        let at0 = placement_reward(&t, NodeId(0), &[NodeId(3)], 1.0, 100.0);
        let at2 = placement_reward(&t, NodeId(2), &[NodeId(3)], 1.0, 100.0);
        assert!(at0 > at2);
    }

    #[test]
    fn unreachable_uses_penalty() {
        let mut t = placement_fixture();
        t.links[2].up = false;
        let r = placement_reward(&t, NodeId(0), &[NodeId(3)], 1.0, 40.0);
        assert!((r - (1.0 / 3.0 + 1.0 / 40.0)).abs() < 1e-12);
    }

    fn env(app: Application, tau: u64) -> Environment {
        let topo = generate_topology(&GenerationConfig {
            num_domains: 5,
            switches_range: [3, 5],
            rng_seed: 8,
            ..GenerationConfig::default()
        })
        .unwrap();
        let cfg = EnvConfig { tau, horizon: 50, ..EnvConfig::default() };
        Environment::new(topo, cfg, app, DynamicsConfig { link_flip_prob: 0.2, rng_seed: 4, ..DynamicsConfig::default() }).unwrap()
    }

    #[test]
    fn reset_gives_zero_state() {
        let mut e = env(Application::Spr { k: None }, 10);
        let s = e.reset();
        assert!(s.encode(100).iter().all(|&v| v == 0.0));
        assert_eq!(s.sync_part.len(), 4);
        assert_eq!(e.knowledge().perceived_global_graph(e.truth()), *e.truth());
        e.step_index(3).unwrap();
        assert_eq!(e.reset(), s);
    }

    #[test]
    fn tau_gating() {
        let mut e = env(Application::Spr { k: None }, 10);
        e.reset();
        let sites = e.candidate_sites().len();
        for t in 0..30u64 {
            let site = (e.site_index() + 1) % sites;
            let before = e.site_index();
            let out = e
                .step(&JointAction { sync_set: vec![0, 1], place_site: site })
                .unwrap();
            assert_eq!(out.placement_applied, t % 10 == 0);
            if t % 10 == 0 {
                assert_eq!(e.site_index(), site);
            } else {
                assert_eq!(e.site_index(), before);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut e = env(Application::Spr { k: None }, 10);
        e.reset();
        let err = e.step(&JointAction { sync_set: vec![0, 1, 2], place_site: 0 }).unwrap_err();
        assert!(matches!(err, EnvError::BudgetViolation { budget: 2, got: 3 }));
        assert!(e.step(&JointAction { sync_set: vec![1, 1], place_site: 0 }).is_err());
        assert!(e.step(&JointAction { sync_set: vec![0, 7], place_site: 0 }).is_err());
        assert!(e.step(&JointAction { sync_set: vec![0, 1], place_site: 99 }).is_err());
        assert_eq!(e.t(), 0);
    }

    #[test]
    fn joint_reward_identity_and_staleness_law() {
        for app in [Application::Spr { k: None }, Application::Lb { capacity_reference: 10.0 }] {
            let mut e = env(app, 7);
            let mut prev = e.reset();
            for t in 0..40 {
                let idx = (t * 7) % e.action_space().len();
                let action = e.action_space().action(idx).unwrap();
                let out = e.step(&action).unwrap();
                assert_eq!(out.r_total - out.r_sync * (e.config().alpha + out.r_place), 0.0);
                for (i, &s) in out.next_state.sync_part.iter().enumerate() {
                    let expected = if action.sync_set.contains(&i) { 1 } else { prev.sync_part[i] + 1 };
                    assert_eq!(s, expected);
                }
                prev = out.next_state;
            }
        }
    }

    #[test]
    fn lb_requires_large_enough_reference() {
        let topo = placement_fixture();
        let err = Environment::new(
            topo,
            EnvConfig::default(),
            Application::Lb { capacity_reference: 5.0 },
            DynamicsConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EnvError::Config(_)));
    }
}
