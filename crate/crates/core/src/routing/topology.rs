//! Random geometric topologies: k-nearest-neighbor link sampling with a
//! connectivity repair pass, per-link rate scaling, a line-oriented text
//! format, and a max-flow capacity helper.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numfmt::format_sig;

use super::RoutingConfig;

/// One directed capacitated link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    /// Bits per second.
    pub rate: f64,
}

/// Node coordinates plus the directed link list, with a per-node index of
/// outgoing links sorted by neighbor id (the tie-break order used
/// everywhere).
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    pub nodes: Vec<(f64, f64)>,
    pub links: Vec<Link>,
    pub mean_rate: f64,
    outgoing: Vec<Vec<usize>>,
}

impl TopologyGraph {
    pub fn from_parts(nodes: Vec<(f64, f64)>, links: Vec<Link>, mean_rate: f64) -> Self {
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (idx, link) in links.iter().enumerate() {
            outgoing[link.from].push(idx);
        }
        for list in &mut outgoing {
            list.sort_by_key(|&idx| links[idx].to);
        }
        Self {
            nodes,
            links,
            mean_rate,
            outgoing,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Outgoing link indices of `node`, sorted by neighbor id.
    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &idx in &self.outgoing[u] {
                let v = self.links[idx].to;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Undirected edges present after the k-nearest-neighbor sampling pass but
/// before connectivity repair. Exposed for the link-census regression test.
pub fn sample_candidate_edges<R: Rng>(
    rng: &mut R,
    nodes: &[(f64, f64)],
    k_nn: usize,
    p_link: f64,
) -> Vec<(usize, usize)> {
    let n = nodes.len();
    let mut edges = Vec::new();
    let mut present = BTreeSet::new();
    for u in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        others.sort_by(|&a, &b| {
            distance(nodes[u], nodes[a])
                .partial_cmp(&distance(nodes[u], nodes[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        for &v in others.iter().take(k_nn) {
            // Each (node, neighbor) pair flips its own coin; the edge set
            // deduplicates whichever direction fires first.
            if rng.random_range(0.0..1.0) < p_link {
                let key = (u.min(v), u.max(v));
                if present.insert(key) {
                    edges.push(key);
                }
            }
        }
    }
    edges
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut comp: Vec<usize> = (0..n).collect();
    // Tiny union-find without rank; n stays small.
    fn find(comp: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while comp[root] != root {
            root = comp[root];
        }
        let mut cur = x;
        while comp[cur] != root {
            let next = comp[cur];
            comp[cur] = root;
            cur = next;
        }
        root
    }
    for &(u, v) in edges {
        let ru = find(&mut comp, u);
        let rv = find(&mut comp, v);
        if ru != rv {
            comp[ru.max(rv)] = ru.min(rv);
        }
    }
    (0..n).map(|x| find(&mut comp, x)).collect()
}

/// Add the globally closest inter-component node pair until connected.
fn repair_connectivity(nodes: &[(f64, f64)], edges: &mut Vec<(usize, usize)>) {
    loop {
        let comp = components(nodes.len(), edges);
        let mut best: Option<(f64, usize, usize)> = None;
        for u in 0..nodes.len() {
            for v in (u + 1)..nodes.len() {
                if comp[u] != comp[v] {
                    let d = distance(nodes[u], nodes[v]);
                    let better = match best {
                        None => true,
                        Some((bd, bu, bv)) => d < bd || (d == bd && (u, v) < (bu, bv)),
                    };
                    if better {
                        best = Some((d, u, v));
                    }
                }
            }
        }
        match best {
            Some((_, u, v)) => edges.push((u, v)),
            None => break,
        }
    }
}

/// Sample a connected topology. Node coordinates are uniform on
/// [0,100]x[0,100]; each node tries to connect to its `k_nn` nearest
/// neighbors with probability `p_link` per attempt; disconnected components
/// are then merged through their closest node pairs. Every directed link
/// draws its own rate, uniform on [0.3, 1.7] times the mean rate.
pub fn generate_topology(seed: u64, cfg: &RoutingConfig) -> TopologyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<(f64, f64)> = (0..cfg.nodes)
        .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
        .collect();
    let mut edges = sample_candidate_edges(&mut rng, &nodes, cfg.nearest_neighbors, cfg.link_prob);
    repair_connectivity(&nodes, &mut edges);

    let mut links = Vec::with_capacity(edges.len() * 2);
    for (u, v) in edges {
        for (a, b) in [(u, v), (v, u)] {
            let scale = rng.random_range(0.3..1.7);
            links.push(Link {
                from: a,
                to: b,
                rate: scale * cfg.mean_rate,
            });
        }
    }
    TopologyGraph::from_parts(nodes, links, cfg.mean_rate)
}

#[derive(Debug, Error)]
pub enum TopologyFormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Line-oriented text form: one `node <id> <x> <y>` per node followed by one
/// `link <u> <v> <rate>` per directed link, values with 6 significant digits.
pub fn write_topology(graph: &TopologyGraph) -> String {
    let mut out = String::new();
    for (id, &(x, y)) in graph.nodes.iter().enumerate() {
        out.push_str(&format!(
            "node {id} {} {}\n",
            format_sig(x, 6),
            format_sig(y, 6)
        ));
    }
    for link in &graph.links {
        out.push_str(&format!(
            "link {} {} {}\n",
            link.from,
            link.to,
            format_sig(link.rate, 6)
        ));
    }
    out
}

pub fn read_topology(text: &str, mean_rate: f64) -> Result<TopologyGraph, TopologyFormatError> {
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fail = |message: String| TopologyFormatError::Malformed {
            line: lineno + 1,
            message,
        };
        match fields[0] {
            "node" if fields.len() == 4 => {
                let id: usize = fields[1].parse().map_err(|e| fail(format!("{e}")))?;
                if id != nodes.len() {
                    return Err(fail(format!("node ids must be sequential, got {id}")));
                }
                let x: f64 = fields[2].parse().map_err(|e| fail(format!("{e}")))?;
                let y: f64 = fields[3].parse().map_err(|e| fail(format!("{e}")))?;
                nodes.push((x, y));
            }
            "link" if fields.len() == 4 => {
                let from: usize = fields[1].parse().map_err(|e| fail(format!("{e}")))?;
                let to: usize = fields[2].parse().map_err(|e| fail(format!("{e}")))?;
                let rate: f64 = fields[3].parse().map_err(|e| fail(format!("{e}")))?;
                if from >= nodes.len() || to >= nodes.len() {
                    return Err(fail(format!("link {from}->{to} references unknown node")));
                }
                links.push(Link { from, to, rate });
            }
            other => {
                return Err(fail(format!("unrecognized record `{other}`")));
            }
        }
    }
    Ok(TopologyGraph::from_parts(nodes, links, mean_rate))
}

/// Maximum sustainable flow (bits per slot) from the source set to the
/// sink under the service model where every node activates at most one
/// outgoing link per slot. Time-sharing bounds a node's out-throughput by
/// its best single link, so each node is split into an in/out pair joined
/// by an arc of that capacity; links then connect out-halves to in-halves
/// at `rate * slot_secs`. Edmonds-Karp on an adjacency matrix; topologies
/// stay small.
pub fn min_cut_capacity(
    graph: &TopologyGraph,
    sources: &[usize],
    sink: usize,
    slot_secs: f64,
) -> f64 {
    let base = graph.node_count();
    // Layout: in-half = v, out-half = base + v, super-source at the end.
    let n = 2 * base + 1;
    let super_source = n - 1;
    let mut capacity = vec![vec![0.0f64; n]; n];
    for v in 0..base {
        let best = graph
            .outgoing(v)
            .iter()
            .map(|&idx| graph.links[idx].rate * slot_secs)
            .fold(0.0f64, f64::max);
        capacity[v][base + v] = best;
    }
    for link in &graph.links {
        capacity[base + link.from][link.to] += link.rate * slot_secs;
    }
    let total_rate: f64 = graph.links.iter().map(|l| l.rate * slot_secs).sum();
    for &s in sources {
        capacity[super_source][s] = total_rate + 1.0; // effectively unbounded
    }

    let mut flow = 0.0;
    loop {
        // BFS for a shortest augmenting path.
        let mut parent = vec![usize::MAX; n];
        parent[super_source] = super_source;
        let mut queue = std::collections::VecDeque::from([super_source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if parent[v] == usize::MAX && capacity[u][v] > 1e-12 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != super_source {
            let u = parent[v];
            bottleneck = bottleneck.min(capacity[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != super_source {
            let u = parent[v];
            capacity[u][v] -= bottleneck;
            capacity[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
    flow
}
