//! Slow, obviously-correct reference computations used to check the
//! production code: exhaustive path enumeration, exhaustive one-step action
//! search and finite-difference gradients.

use sdnsync::agent::Mlp;
use sdnsync::{Environment, NodeId, Topology};

/// Largest topology [`brute_shortest_path`] accepts.
pub const MAX_BRUTE_NODES: usize = 10;

/// Minimum delay over every simple path between `a` and `b` using only live
/// links, found by exhaustive depth-first enumeration. Delays are summed
/// from the lower-numbered endpoint. `None` when unreachable; panics above
/// [`MAX_BRUTE_NODES`] nodes.
pub fn brute_shortest_path(topology: &Topology, a: NodeId, b: NodeId) -> Option<f64> {
    let n = topology.num_nodes();
    assert!(n <= MAX_BRUTE_NODES, "brute force refuses {n} > {MAX_BRUTE_NODES} nodes");
    let (src, dst) = if a <= b { (a.0, b.0) } else { (b.0, a.0) };
    if src == dst {
        return Some(0.0);
    }
    let mut adj = vec![Vec::new(); n];
    for l in topology.links.iter().filter(|l| l.up) {
        adj[l.u.0].push((l.v.0, l.delay));
        adj[l.v.0].push((l.u.0, l.delay));
    }
    let mut visited = vec![false; n];
    visited[src] = true;
    let mut best = None;
    dfs(&adj, src, dst, 0.0, &mut visited, &mut best);
    best
}

fn dfs(adj: &[Vec<(usize, f64)>], at: usize, dst: usize, cost: f64, visited: &mut [bool], best: &mut Option<f64>) {
    for &(next, d) in &adj[at] {
        if visited[next] {
            continue;
        }
        let c = cost + d;
        if next == dst {
            if best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
            continue;
        }
        visited[next] = true;
        dfs(adj, next, dst, c, visited, best);
        visited[next] = false;
    }
}

/// The flat action maximizing the one-step `r_total` from `env`'s current
/// state, tried on a clone per action. Ties go to the lowest index.
pub fn brute_best_action(env: &Environment) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..env.action_space().len() {
        let mut trial = env.clone();
        let r = trial.step_index(i).expect("enumerated actions are valid").r_total;
        if r > best.1 {
            best = (i, r);
        }
    }
    best
}

/// All one-step `r_total` values from `env`'s current state, by flat index.
pub fn one_step_rewards(env: &Environment) -> Vec<f64> {
    (0..env.action_space().len())
        .map(|i| {
            let mut trial = env.clone();
            trial.step_index(i).expect("enumerated actions are valid").r_total
        })
        .collect()
}

/// Mean squared TD error evaluated with forward passes only.
pub fn td_loss(net: &Mlp, states: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> f64 {
    let mut sum = 0.0;
    for ((s, &a), &y) in states.iter().zip(actions).zip(targets) {
        let q = net.forward(s).expect("state matches the network input");
        sum += (y - q[a]).powi(2);
    }
    sum / states.len() as f64
}

/// Central-difference gradient of [`td_loss`] with respect to every
/// parameter, in the order of [`Mlp::params_flat`].
pub fn finite_diff_grad(net: &Mlp, states: &[Vec<f64>], actions: &[usize], targets: &[f64], h: f64) -> Vec<f64> {
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut grad = Vec::with_capacity(base.len());
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + h;
        probe.set_params_flat(&params);
        let up = td_loss(&probe, states, actions, targets);
        params[i] = base[i] - h;
        probe.set_params_flat(&params);
        let down = td_loss(&probe, states, actions, targets);
        params[i] = base[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}
