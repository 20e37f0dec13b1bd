//! Multi-domain network graph, its stochastic evolution, and shortest-path
//! delays.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding;

/// Retry bound for the rejection-sampled parts of topology generation.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Relative tolerance used when comparing summed path delays.
pub const DELAY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("no connected {what} after {attempts} attempts; the generation config is over-constrained")]
    Disconnected { what: String, attempts: usize },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("topology json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub u: NodeId,
    pub v: NodeId,
    pub delay: f64,
    pub up: bool,
}

impl Link {
    pub fn new(a: NodeId, b: NodeId, delay: f64) -> Self {
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        Link { u, v, delay, up: true }
    }

    pub fn connects(&self, a: NodeId, b: NodeId) -> bool {
        (self.u == a && self.v == b) || (self.u == b && self.v == a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub id: usize,
    pub switches: Vec<NodeId>,
    pub candidate_sites: Vec<NodeId>,
    pub controller_site: NodeId,
    pub servers: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeId>,
    pub links: Vec<Link>,
    pub domains: Vec<Domain>,
    pub focal_domain: usize,
}

impl Topology {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn focal(&self) -> &Domain {
        &self.domains[self.focal_domain]
    }

    /// Domain id of every node, indexed by node id.
    pub fn node_domains(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.nodes.len()];
        for d in &self.domains {
            for s in &d.switches {
                owner[s.0] = d.id;
            }
        }
        owner
    }

    /// Minimum-delay path cost over live links, `None` when unreachable.
    pub fn delay(&self, a: NodeId, b: NodeId) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        // always search from the lower id so delay(a, b) == delay(b, a) bitwise
        let (src, dst) = (a.min(b), a.max(b));
        let d = Graph::live(self).distances_from(src.0)[dst.0];
        d.is_finite().then_some(d)
    }

    /// Largest finite shortest-path delay when every link is treated as up.
    pub fn diameter_all_up(&self) -> f64 {
        let g = Graph::all_up(self);
        (0..self.nodes.len())
            .flat_map(|s| g.distances_from(s))
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |msg: String| Err(TopologyError::Invalid(msg));
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.0 != i {
                return bad(format!("node ids must be dense 0..{n}, found {node} at position {i}"));
            }
        }
        if self.domains.len() < 2 {
            return bad("at least two domains are required".into());
        }
        if self.focal_domain >= self.domains.len() {
            return bad(format!("focal_domain {} out of range", self.focal_domain));
        }
        let mut owner = vec![None; n];
        for (i, d) in self.domains.iter().enumerate() {
            if d.id != i {
                return bad(format!("domain at position {i} has id {}", d.id));
            }
            if d.switches.is_empty() {
                return bad(format!("domain {i} has no switches"));
            }
            for s in &d.switches {
                if s.0 >= n {
                    return bad(format!("domain {i} lists unknown node {s}"));
                }
                if let Some(prev) = owner[s.0].replace(i) {
                    return bad(format!("node {s} belongs to domains {prev} and {i}"));
                }
            }
            if d.candidate_sites.is_empty() {
                return bad(format!("domain {i} has no candidate sites"));
            }
            if let Some(s) = d.candidate_sites.iter().find(|s| !d.switches.contains(s)) {
                return bad(format!("candidate site {s} is not a switch of domain {i}"));
            }
            if !d.candidate_sites.contains(&d.controller_site) {
                return bad(format!("controller site of domain {i} is not a candidate site"));
            }
            for (s, cap) in &d.servers {
                if !d.switches.contains(s) {
                    return bad(format!("server {s} is not a switch of domain {i}"));
                }
                if !cap.is_finite() || *cap < 0.0 {
                    return bad(format!("server {s} has invalid capacity {cap}"));
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return bad(format!("node n{i} belongs to no domain"));
        }
        let mut seen = BTreeSet::new();
        for l in &self.links {
            if l.u.0 >= n || l.v.0 >= n {
                return bad(format!("link {}-{} references an unknown node", l.u, l.v));
            }
            if l.u == l.v {
                return bad(format!("self-loop at {}", l.u));
            }
            if !(l.delay.is_finite() && l.delay > 0.0) {
                return bad(format!("link {}-{} has non-positive delay {}", l.u, l.v, l.delay));
            }
            if !seen.insert((l.u.min(l.v), l.u.max(l.v))) {
                return bad(format!("duplicate link {}-{}", l.u, l.v));
            }
        }
        let g = Graph::all_up(self);
        if g.distances_from(0).iter().any(|d| !d.is_finite()) {
            return bad("graph is not connected with all links up".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, TopologyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, TopologyError> {
        let t: Topology = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node id
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn delays_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= DELAY_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Adjacency view of a topology. Neighbor lists are sorted by node id.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Only links that are currently up.
    pub fn live(t: &Topology) -> Self {
        Self::build(t, |l| l.up)
    }

    pub fn all_up(t: &Topology) -> Self {
        Self::build(t, |_| true)
    }

    fn build(t: &Topology, keep: impl Fn(&Link) -> bool) -> Self {
        let mut adj = vec![Vec::new(); t.nodes.len()];
        for l in t.links.iter().filter(|l| keep(l)) {
            adj[l.u.0].push((l.v.0, l.delay));
            adj[l.v.0].push((l.u.0, l.delay));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        Graph { adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    pub fn edge_delay(&self, a: usize, b: usize) -> Option<f64> {
        let list = &self.adj[a];
        list.binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| list[i].1)
    }

    /// Dijkstra from `src`; unreachable nodes get `f64::INFINITY`.
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: src });
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapEntry { dist: nd, node: v });
                }
            }
        }
        dist
    }

    /// Lexicographically smallest minimum-delay path from `src` to the node
    /// whose distance field is `dist_to_dst` (as returned by
    /// `distances_from(dst)`).
    pub fn shortest_path_lex(&self, src: usize, dst: usize, dist_to_dst: &[f64]) -> Option<Vec<usize>> {
        if !dist_to_dst[src].is_finite() {
            return None;
        }
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            let here = dist_to_dst[cur];
            let next = self.adj[cur].iter().find(|&&(v, w)| {
                dist_to_dst[v] < here && delays_equal(w + dist_to_dst[v], here)
            })?;
            cur = next.0;
            path.push(cur);
        }
        Some(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub num_domains: usize,
    /// Inclusive bounds on switches per domain.
    pub switches_range: [usize; 2],
    /// Probability that a given pair of switches in one domain is linked.
    pub link_density: f64,
    /// Probability that a given pair of domains is directly adjacent.
    pub inter_domain_density: f64,
    /// Inclusive bounds on parallel links between two adjacent domains.
    pub inter_domain_links: [usize; 2],
    pub delay_range: [f64; 2],
    pub servers_per_domain: [usize; 2],
    /// Initial server capacities are drawn uniformly from this range.
    pub capacity_range: [f64; 2],
    pub focal_domain: usize,
    /// Number of focal switches offered as placement candidates; all when unset.
    pub candidate_sites: Option<usize>,
    pub rng_seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            num_domains: 7,
            switches_range: [3, 15],
            link_density: 0.4,
            inter_domain_density: 0.5,
            inter_domain_links: [1, 2],
            delay_range: [0.1, 1.0],
            servers_per_domain: [1, 2],
            capacity_range: [0.0, 10.0],
            focal_domain: 0,
            candidate_sites: None,
            rng_seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |msg: String| Err(TopologyError::Config(msg));
        let [lo, hi] = self.switches_range;
        if self.num_domains < 2 {
            return bad(format!("num_domains must be >= 2, got {}", self.num_domains));
        }
        if lo < 1 || hi > 64 || lo > hi {
            return bad(format!("switches_range must satisfy 1 <= min <= max <= 64, got [{lo}, {hi}]"));
        }
        for (name, p) in [
            ("link_density", self.link_density),
            ("inter_domain_density", self.inter_domain_density),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        let [l0, l1] = self.inter_domain_links;
        if l0 < 1 || l0 > l1 {
            return bad(format!("inter_domain_links must satisfy 1 <= min <= max, got [{l0}, {l1}]"));
        }
        let [d0, d1] = self.delay_range;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return bad(format!("delay_range must satisfy 0 < min <= max, got [{d0}, {d1}]"));
        }
        let [s0, s1] = self.servers_per_domain;
        if s0 > s1 {
            return bad(format!("servers_per_domain min > max: [{s0}, {s1}]"));
        }
        let [c0, c1] = self.capacity_range;
        if !(c0 >= 0.0 && c0 <= c1 && c1.is_finite()) {
            return bad(format!("capacity_range must satisfy 0 <= min <= max, got [{c0}, {c1}]"));
        }
        if self.focal_domain >= self.num_domains {
            return bad(format!(
                "focal_domain {} out of range for {} domains",
                self.focal_domain, self.num_domains
            ));
        }
        if self.candidate_sites == Some(0) {
            return bad("candidate_sites must be >= 1 when set".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

/// Builds a random multi-domain topology. Each domain is a connected random
/// graph over its switches; domains are joined by a connected random
/// domain-level graph whose edges carry one or more inter-domain links.
pub fn generate_topology(cfg: &GenerationConfig) -> Result<Topology, TopologyError> {
    cfg.validate()?;
    let mut rng = seeding::rng_from(cfg.rng_seed);
    let [lo, hi] = cfg.switches_range;

    let sizes: Vec<usize> = (0..cfg.num_domains).map(|_| rng.gen_range(lo..=hi)).collect();
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut total = 0;
    for s in &sizes {
        offsets.push(total);
        total += s;
    }

    let mut links = Vec::new();
    for (d, &size) in sizes.iter().enumerate() {
        let base = offsets[d];
        let mut attempt = 0;
        let edges = loop {
            if attempt == MAX_GENERATION_ATTEMPTS {
                return Err(TopologyError::Disconnected {
                    what: format!("domain {d} ({size} switches)"),
                    attempts: attempt,
                });
            }
            attempt += 1;
            let mut edges = Vec::new();
            for i in 0..size {
                for j in i + 1..size {
                    if rng.gen_bool(cfg.link_density) {
                        edges.push((i, j));
                    }
                }
            }
            if connected(size, &edges) {
                break edges;
            }
        };
        for (i, j) in edges {
            let delay = uniform(&mut rng, cfg.delay_range);
            links.push(Link::new(NodeId(base + i), NodeId(base + j), delay));
        }
    }

    let mut attempt = 0;
    let adjacent = loop {
        if attempt == MAX_GENERATION_ATTEMPTS {
            return Err(TopologyError::Disconnected {
                what: "domain-level graph".into(),
                attempts: attempt,
            });
        }
        attempt += 1;
        let mut pairs = Vec::new();
        for a in 0..cfg.num_domains {
            for b in a + 1..cfg.num_domains {
                if rng.gen_bool(cfg.inter_domain_density) {
                    pairs.push((a, b));
                }
            }
        }
        if connected(cfg.num_domains, &pairs) {
            break pairs;
        }
    };
    let mut present: BTreeSet<(NodeId, NodeId)> = links.iter().map(|l| (l.u, l.v)).collect();
    for (a, b) in adjacent {
        let max_links = sizes[a] * sizes[b];
        let want = rng
            .gen_range(cfg.inter_domain_links[0]..=cfg.inter_domain_links[1])
            .min(max_links);
        let mut added = 0;
        while added < want {
            let u = NodeId(offsets[a] + rng.gen_range(0..sizes[a]));
            let v = NodeId(offsets[b] + rng.gen_range(0..sizes[b]));
            if present.insert((u, v)) {
                links.push(Link::new(u, v, uniform(&mut rng, cfg.delay_range)));
                added += 1;
            }
        }
    }
    links.sort_by_key(|l| (l.u, l.v));

    let mut domains = Vec::with_capacity(cfg.num_domains);
    for (d, &size) in sizes.iter().enumerate() {
        let switches: Vec<NodeId> = (offsets[d]..offsets[d] + size).map(NodeId).collect();
        let candidate_sites = match cfg.candidate_sites {
            Some(k) if d == cfg.focal_domain && k < size => {
                let mut picked: Vec<NodeId> = index::sample(&mut rng, size, k)
                    .into_iter()
                    .map(|i| switches[i])
                    .collect();
                picked.sort();
                picked
            }
            _ => switches.clone(),
        };
        let controller_site = candidate_sites[rng.gen_range(0..candidate_sites.len())];
        let [s0, s1] = cfg.servers_per_domain;
        let num_servers = rng.gen_range(s0..=s1).min(size);
        let mut servers = BTreeMap::new();
        for i in index::sample(&mut rng, size, num_servers) {
            servers.insert(switches[i], uniform(&mut rng, cfg.capacity_range));
        }
        domains.push(Domain {
            id: d,
            switches,
            candidate_sites,
            controller_site,
            servers,
        });
    }

    let topology = Topology {
        nodes: (0..total).map(NodeId).collect(),
        links,
        domains,
        focal_domain: cfg.focal_domain,
    };
    topology.validate()?;
    Ok(topology)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Per-link, per-step probability of toggling liveness.
    pub link_flip_prob: f64,
    /// Maximum absolute per-step change of a server capacity.
    pub capacity_step: f64,
    pub capacity_bounds: [f64; 2],
    pub rng_seed: u64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            link_flip_prob: 0.01,
            capacity_step: 0.5,
            capacity_bounds: [0.0, 10.0],
            rng_seed: 0,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |msg: String| Err(TopologyError::Config(msg));
        if !(0.0..=1.0).contains(&self.link_flip_prob) {
            return bad(format!("link_flip_prob must be in [0, 1], got {}", self.link_flip_prob));
        }
        if !(self.capacity_step >= 0.0 && self.capacity_step.is_finite()) {
            return bad(format!("capacity_step must be >= 0, got {}", self.capacity_step));
        }
        let [lo, hi] = self.capacity_bounds;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return bad(format!("capacity_bounds must satisfy min <= max, got [{lo}, {hi}]"));
        }
        Ok(())
    }
}

pub fn perturb_capacity(capacity: f64, delta: f64, [lo, hi]: [f64; 2]) -> f64 {
    (capacity + delta).clamp(lo, hi)
}

/// Advances the world by one step. Each link toggles independently with
/// `link_flip_prob`; each server capacity takes a uniform step in
/// `[-capacity_step, capacity_step]` and is clamped into bounds. The draw
/// sequence depends only on `(rng_seed, t)`.
pub fn step_dynamics(topology: &Topology, dynamics: &DynamicsConfig, t: u64) -> Topology {
    let mut rng = seeding::rng_from(seeding::derive(dynamics.rng_seed, t));
    let mut next = topology.clone();
    for link in &mut next.links {
        if rng.gen_bool(dynamics.link_flip_prob) {
            link.up = !link.up;
        }
    }
    for domain in &mut next.domains {
        for cap in domain.servers.values_mut() {
            let u: f64 = rng.gen();
            let delta = (2.0 * u - 1.0) * dynamics.capacity_step;
            *cap = perturb_capacity(*cap, delta, dynamics.capacity_bounds);
        }
    }
    next
}
