//! Application-specific synchronization rewards: shortest-path routing (SPR)
//! and load balancing (LB).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{delays_equal, Graph, NodeId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum AppError {
    #[error("shortest-path detection needs at least one (source, destination) pair")]
    NoPairs,
    #[error("load balancing needs at least one server")]
    NoServers,
    #[error("invalid application config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplicationKind {
    Spr,
    Lb,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprConfig {
    /// Per-detection reward scale. Unset means `1 / evaluated pairs`, so the
    /// reward equals the detection rate.
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbConfig {
    /// `C_ref` in `reward = C_ref - loss`. Unset means the upper capacity bound.
    pub capacity_reference: Option<f64>,
}

/// The active application together with its resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Application {
    Spr { k: Option<f64> },
    Lb { capacity_reference: f64 },
}

impl Application {
    pub fn kind(&self) -> ApplicationKind {
        match self {
            Application::Spr { .. } => ApplicationKind::Spr,
            Application::Lb { .. } => ApplicationKind::Lb,
        }
    }
}

/// All (focal switch, external switch) pairs, ordered by source then destination.
pub fn pair_universe(topology: &Topology) -> Vec<(NodeId, NodeId)> {
    let focal = topology.focal();
    let mut pairs = Vec::new();
    for &s in &focal.switches {
        for d in topology.domains.iter().filter(|d| d.id != focal.id) {
            for &t in &d.switches {
                pairs.push((s, t));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprOutcome {
    pub detected: usize,
    /// Pairs whose destination is reachable in the true network.
    pub evaluated: usize,
    /// Pairs excluded because the true destination is unreachable.
    pub unreachable: usize,
    /// `detected / evaluated`; 1 when nothing is evaluable.
    pub rate: f64,
}

/// Counts pairs whose route computed on the perceived network is still valid
/// and optimal on the true network.
pub fn spr_detect(
    perceived: &Topology,
    truth: &Topology,
    pairs: &[(NodeId, NodeId)],
) -> Result<SprOutcome, AppError> {
    if pairs.is_empty() {
        return Err(AppError::NoPairs);
    }
    let seen = Graph::live(perceived);
    let real = Graph::live(truth);
    let n = truth.num_nodes();
    let mut seen_to: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut real_to: Vec<Option<Vec<f64>>> = vec![None; n];

    let mut out = SprOutcome {
        detected: 0,
        evaluated: 0,
        unreachable: 0,
        rate: 1.0,
    };
    for &(s, t) in pairs {
        let true_cost = real_to[t.0].get_or_insert_with(|| real.distances_from(t.0))[s.0];
        if !true_cost.is_finite() {
            out.unreachable += 1;
            continue;
        }
        out.evaluated += 1;
        let dist = seen_to[t.0].get_or_insert_with(|| seen.distances_from(t.0));
        let Some(path) = seen.shortest_path_lex(s.0, t.0, dist) else {
            continue;
        };
        let mut cost = 0.0;
        let valid = path.windows(2).all(|w| match real.edge_delay(w[0], w[1]) {
            Some(d) => {
                cost += d;
                true
            }
            None => false,
        });
        if valid && delays_equal(cost, true_cost) {
            out.detected += 1;
        }
    }
    if out.evaluated > 0 {
        out.rate = out.detected as f64 / out.evaluated as f64;
    }
    Ok(out)
}

pub fn spr_reward(detect_count: usize, k: f64) -> f64 {
    k * detect_count as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbOutcome {
    pub loss: f64,
    pub perceived_best: NodeId,
    pub actual_best: NodeId,
}

fn best_server(topology: &Topology) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for d in &topology.domains {
        for (&node, &cap) in &d.servers {
            best = match best {
                Some((b, c)) if c > cap || (c == cap && b < node) => Some((b, c)),
                _ => Some((node, cap)),
            };
        }
    }
    best
}

/// Capacity lost by sending a task to the perceived-best server instead of
/// the truly best one.
pub fn lb_loss(perceived: &Topology, truth: &Topology) -> Result<LbOutcome, AppError> {
    let (perceived_best, _) = best_server(perceived).ok_or(AppError::NoServers)?;
    let (actual_best, best_cap) = best_server(truth).ok_or(AppError::NoServers)?;
    let chosen_cap = truth
        .domains
        .iter()
        .find_map(|d| d.servers.get(&perceived_best))
        .copied()
        .ok_or(AppError::NoServers)?;
    Ok(LbOutcome {
        loss: best_cap - chosen_cap,
        perceived_best,
        actual_best,
    })
}

pub fn lb_reward(loss: f64, capacity_reference: f64) -> f64 {
    capacity_reference - loss
}
