#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use sdnsync::{Domain, Link, NodeId, Topology};

pub fn domain(id: usize, switches: &[usize], sites: &[usize], controller: usize) -> Domain {
    Domain {
        id,
        switches: switches.iter().copied().map(NodeId).collect(),
        candidate_sites: sites.iter().copied().map(NodeId).collect(),
        controller_site: NodeId(controller),
        servers: BTreeMap::from([(NodeId(controller), 5.0)]),
    }
}

/// Focal domain {0, 1, 2} with the controller at 0; switch 1 at delay 1,
/// switch 2 at delay 2, neighbor controller 3 at delay 4.
pub fn placement_fixture() -> Topology {
    Topology {
        nodes: (0..4).map(NodeId).collect(),
        links: vec![
            Link::new(NodeId(0), NodeId(1), 1.0),
            Link::new(NodeId(0), NodeId(2), 2.0),
            Link::new(NodeId(0), NodeId(3), 4.0),
        ],
        domains: vec![domain(0, &[0, 1, 2], &[0, 1, 2], 0), domain(1, &[3], &[3], 3)],
        focal_domain: 0,
    }
}

/// Three domains; the focal one has two candidate sites, 0 (central) and 2
/// (peripheral). Neighbor controller 3 is near, controller 5 is far.
pub fn myopic_fixture() -> Topology {
    let mut links = vec![
        Link::new(NodeId(0), NodeId(1), 0.5),
        Link::new(NodeId(1), NodeId(2), 1.5),
        Link::new(NodeId(0), NodeId(3), 1.0),
        Link::new(NodeId(3), NodeId(4), 1.0),
        Link::new(NodeId(2), NodeId(5), 3.0),
        Link::new(NodeId(4), NodeId(5), 2.0),
    ];
    links.sort_by_key(|l| (l.u, l.v));
    Topology {
        nodes: (0..6).map(NodeId).collect(),
        links,
        domains: vec![
            domain(0, &[0, 1, 2], &[0, 2], 2),
            domain(1, &[3, 4], &[3], 3),
            domain(2, &[5], &[5], 5),
        ],
        focal_domain: 0,
    }
}

/// `n` nodes in one domain with each pair linked with probability 1/2,
/// random delays from a small set (so ties happen) and random liveness.
pub fn random_small_topology(rng: &mut impl Rng, n: usize) -> Topology {
    let delays = [0.25, 0.5, 1.0, 1.5, 3.0];
    let mut links = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.5) {
                let mut l = Link::new(NodeId(u), NodeId(v), delays[rng.gen_range(0..delays.len())]);
                l.up = rng.gen_bool(0.7);
                links.push(l);
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    Topology {
        nodes: (0..n).map(NodeId).collect(),
        links,
        domains: vec![domain(0, &all, &all, 0)],
        focal_domain: 0,
    }
}
