//! The focal controller's eventually-consistent view of its neighbors.
//!
//! Each neighbor domain is held as an atomic snapshot (link liveness plus
//! server capacities) together with the step at which it was captured.
//! Inter-domain links belong to the snapshot of the lower-numbered of their
//! two domains, so every link has exactly one owner when views are merged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{Link, NodeId, Topology};

pub const DEFAULT_STALENESS_CAP: u64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum KnowledgeError {
    #[error("domain {0} is not a neighbor of the focal domain")]
    UnknownNeighbor(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSnapshot {
    pub domain_id: usize,
    /// Owned links, in the order of [`KnowledgeBase::owned_links`].
    pub links: Vec<Link>,
    pub servers: BTreeMap<NodeId, f64>,
    pub captured_at: u64,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    focal: usize,
    neighbors: Vec<usize>,
    /// Link indices owned by each domain, indexed by domain id.
    owned: Vec<Vec<usize>>,
    /// One snapshot per neighbor, same order as `neighbors`.
    snapshots: Vec<DomainSnapshot>,
    now: u64,
    cap: u64,
}

impl KnowledgeBase {
    /// Captures fresh snapshots of every neighbor at step 0.
    pub fn new(truth: &Topology, cap: u64) -> Self {
        let owner = truth.node_domains();
        let mut owned = vec![Vec::new(); truth.domains.len()];
        for (i, l) in truth.links.iter().enumerate() {
            owned[owner[l.u.0].min(owner[l.v.0])].push(i);
        }
        let focal = truth.focal_domain;
        let neighbors: Vec<usize> = (0..truth.domains.len()).filter(|&d| d != focal).collect();
        let mut kb = KnowledgeBase {
            focal,
            snapshots: Vec::with_capacity(neighbors.len()),
            neighbors,
            owned,
            now: 0,
            cap,
        };
        kb.snapshots = kb.neighbors.iter().map(|&d| kb.capture(truth, d)).collect();
        kb
    }

    fn capture(&self, truth: &Topology, domain: usize) -> DomainSnapshot {
        DomainSnapshot {
            domain_id: domain,
            links: self.owned[domain].iter().map(|&i| truth.links[i].clone()).collect(),
            servers: truth.domains[domain].servers.clone(),
            captured_at: self.now,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Neighbor domain ids, ascending; position is the neighbor index.
    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn owned_links(&self, domain: usize) -> &[usize] {
        &self.owned[domain]
    }

    pub fn snapshot(&self, domain: usize) -> Option<&DomainSnapshot> {
        let i = self.neighbors.iter().position(|&d| d == domain)?;
        Some(&self.snapshots[i])
    }

    pub fn snapshots(&self) -> &[DomainSnapshot] {
        &self.snapshots
    }

    /// Replaces the neighbor's snapshot with ground truth at the current step.
    pub fn sync(&mut self, truth: &Topology, domain: usize) -> Result<(), KnowledgeError> {
        let i = self
            .neighbors
            .iter()
            .position(|&d| d == domain)
            .ok_or(KnowledgeError::UnknownNeighbor(domain))?;
        self.snapshots[i] = self.capture(truth, domain);
        Ok(())
    }

    pub fn sync_index(&mut self, truth: &Topology, neighbor_index: usize) -> Result<(), KnowledgeError> {
        let domain = *self
            .neighbors
            .get(neighbor_index)
            .ok_or(KnowledgeError::UnknownNeighbor(neighbor_index))?;
        self.sync(truth, domain)
    }

    /// Moves the clock one step forward; every snapshot ages by one.
    pub fn advance(&mut self) {
        self.now += 1;
    }

    /// Steps since each neighbor's last capture, uncapped.
    pub fn raw_staleness(&self) -> Vec<u64> {
        self.snapshots.iter().map(|s| self.now - s.captured_at).collect()
    }

    /// Staleness saturated at the cap; this is what the agent observes.
    pub fn staleness(&self) -> Vec<u64> {
        self.snapshots
            .iter()
            .map(|s| (self.now - s.captured_at).min(self.cap))
            .collect()
    }

    /// Ground truth for the focal domain merged with each neighbor's snapshot.
    pub fn perceived_global_graph(&self, truth: &Topology) -> Topology {
        let mut view = truth.clone();
        for snap in &self.snapshots {
            for (&i, link) in self.owned[snap.domain_id].iter().zip(&snap.links) {
                view.links[i].up = link.up;
            }
            view.domains[snap.domain_id].servers = snap.servers.clone();
        }
        debug_assert_eq!(view.focal_domain, self.focal);
        view
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{generate_topology, step_dynamics, DynamicsConfig, GenerationConfig};

    fn world() -> Topology {
        generate_topology(&GenerationConfig {
            num_domains: 4,
            switches_range: [3, 5],
            rng_seed: 21,
            ..GenerationConfig::default()
        })
        .unwrap()
    }

    fn churn() -> DynamicsConfig {
        DynamicsConfig {
            link_flip_prob: 0.5,
            capacity_step: 1.0,
            capacity_bounds: [0.0, 10.0],
            rng_seed: 77,
        }
    }

    #[test]
    fn counters_follow_sync_and_advance() {
        let t = world();
        let mut kb = KnowledgeBase::new(&t, DEFAULT_STALENESS_CAP);
        // drive to [0, 3, 7]
        for step in 0..7 {
            if step == 4 {
                kb.sync_index(&t, 1).unwrap();
            }
            kb.sync_index(&t, 0).unwrap();
            kb.advance();
        }
        kb.sync_index(&t, 0).unwrap();
        assert_eq!(kb.staleness(), vec![0, 3, 7]);

        // advance first, then sync neighbor 1 within the new step
        let mut a = kb.clone();
        a.advance();
        a.sync_index(&t, 1).unwrap();
        assert_eq!(a.staleness(), vec![1, 0, 8]);

        // sync within the current step, then advance
        let mut b = kb.clone();
        b.sync_index(&t, 1).unwrap();
        b.advance();
        assert_eq!(b.staleness(), vec![1, 1, 8]);
    }

    #[test]
    fn advance_increments_every_counter() {
        let t = world();
        let mut kb = KnowledgeBase::new(&t, DEFAULT_STALENESS_CAP);
        assert_eq!(kb.staleness(), vec![0, 0, 0]);
        kb.advance();
        assert_eq!(kb.staleness(), vec![1, 1, 1]);
    }

    #[test]
    fn full_budget_keeps_everything_fresh() {
        let t0 = world();
        let dynamics = churn();
        let mut truth = t0.clone();
        let mut kb = KnowledgeBase::new(&truth, DEFAULT_STALENESS_CAP);
        for step in 0..10 {
            for i in 0..kb.neighbors().len() {
                kb.sync_index(&truth, i).unwrap();
            }
            assert_eq!(kb.staleness(), vec![0, 0, 0]);
            assert_eq!(kb.perceived_global_graph(&truth), truth);
            truth = step_dynamics(&truth, &dynamics, step);
            kb.advance();
        }
    }

    #[test]
    fn staleness_saturates_at_cap() {
        let t = world();
        let cap = 100;
        let mut kb = KnowledgeBase::new(&t, cap);
        for _ in 0..cap + 5 {
            kb.advance();
        }
        assert_eq!(kb.staleness(), vec![cap; 3]);
        assert_eq!(kb.raw_staleness(), vec![cap + 5; 3]);
    }

    #[test]
    fn sync_copies_servers_exactly() {
        let t0 = world();
        let mut kb = KnowledgeBase::new(&t0, DEFAULT_STALENESS_CAP);
        let t1 = step_dynamics(&t0, &churn(), 0);
        kb.advance();
        kb.sync(&t1, 2).unwrap();
        assert_eq!(kb.snapshot(2).unwrap().servers, t1.domains[2].servers);
        assert_eq!(kb.snapshot(2).unwrap().captured_at, 1);
        assert_eq!(kb.snapshot(1).unwrap().servers, t0.domains[1].servers);
    }

    #[test]
    fn unknown_neighbor_is_rejected() {
        let t = world();
        let mut kb = KnowledgeBase::new(&t, DEFAULT_STALENESS_CAP);
        assert_eq!(kb.sync(&t, 0), Err(KnowledgeError::UnknownNeighbor(0)));
        assert_eq!(kb.sync(&t, 9), Err(KnowledgeError::UnknownNeighbor(9)));
    }

    #[test]
    fn stale_link_still_shown_up() {
        let t0 = world();
        let kb = KnowledgeBase::new(&t0, DEFAULT_STALENESS_CAP);
        let owner = t0.node_domains();
        let idx = t0
            .links
            .iter()
            .position(|l| owner[l.u.0] == 2 && owner[l.v.0] == 2)
            .unwrap();
        let mut t1 = t0.clone();
        t1.links[idx].up = false;
        let view = kb.perceived_global_graph(&t1);
        assert!(view.links[idx].up);
    }

    #[test]
    fn mixed_fresh_and_stale_neighbors() {
        let t0 = world();
        let mut kb = KnowledgeBase::new(&t0, DEFAULT_STALENESS_CAP);
        let mut truth = t0.clone();
        for step in 0..5 {
            truth = step_dynamics(&truth, &churn(), step);
            kb.advance();
        }
        kb.sync(&truth, 1).unwrap();
        let view = kb.perceived_global_graph(&truth);
        let owner = t0.node_domains();
        for (i, l) in view.links.iter().enumerate() {
            let d = owner[l.u.0].min(owner[l.v.0]);
            let expected = match d {
                0 | 1 => truth.links[i].up,
                _ => t0.links[i].up,
            };
            assert_eq!(l.up, expected, "link {i} owned by domain {d}");
        }
        assert_eq!(view.domains[0].servers, truth.domains[0].servers);
        assert_eq!(view.domains[1].servers, truth.domains[1].servers);
        assert_eq!(view.domains[2].servers, t0.domains[2].servers);
        assert_eq!(view.domains[3].servers, t0.domains[3].servers);
    }
}
