//! Service patterns and the per-slot max-weight solver.
//!
//! A pattern gives every non-sink node at most one active outgoing link. The
//! per-slot objective is separable across nodes under that restriction, so
//! the solver picks each node's best link independently; the exhaustive
//! enumeration path exists to validate exactly that reduction.

use super::topology::TopologyGraph;
use super::RoutingState;

/// One next-hop choice per node: `next_hop[u]` is a link index in the
/// topology's link list, or `None` to idle. The sink always idles.
#[derive(Debug, Clone, PartialEq)]
pub struct ServicePattern {
    pub next_hop: Vec<Option<usize>>,
}

impl ServicePattern {
    pub fn idle(node_count: usize) -> Self {
        Self {
            next_hop: vec![None; node_count],
        }
    }
}

/// The feasible pattern set, either materialized or factored per node when
/// the Cartesian product would be too large to hold.
#[derive(Debug, Clone)]
pub enum PatternSet {
    Explicit(Vec<ServicePattern>),
    Factored(Vec<Vec<Option<usize>>>),
}

impl PatternSet {
    pub fn count(&self) -> usize {
        match self {
            PatternSet::Explicit(patterns) => patterns.len(),
            PatternSet::Factored(choices) => choices
                .iter()
                .fold(1usize, |acc, c| acc.saturating_mul(c.len())),
        }
    }
}

pub const DEFAULT_PATTERN_CAP: usize = 1_000_000;

/// All feasible patterns for `graph` with the given sink. Each non-sink node
/// chooses from idle plus its outgoing links; when the product of choice
/// counts exceeds `cap` the factored per-node form is returned instead.
pub fn enumerate_patterns(graph: &TopologyGraph, sink: usize, cap: usize) -> PatternSet {
    let per_node: Vec<Vec<Option<usize>>> = (0..graph.node_count())
        .map(|u| {
            if u == sink {
                vec![None]
            } else {
                let mut choices = vec![None];
                choices.extend(graph.outgoing(u).iter().map(|&idx| Some(idx)));
                choices
            }
        })
        .collect();

    let total = per_node
        .iter()
        .fold(1usize, |acc, c| acc.saturating_mul(c.len()));
    if total > cap {
        return PatternSet::Factored(per_node);
    }

    // Odometer over the per-node choice lists, node 0 slowest.
    let mut patterns = Vec::with_capacity(total);
    let mut counters = vec![0usize; per_node.len()];
    loop {
        patterns.push(ServicePattern {
            next_hop: counters
                .iter()
                .zip(&per_node)
                .map(|(&c, choices)| choices[c])
                .collect(),
        });
        let mut pos = per_node.len();
        loop {
            if pos == 0 {
                return PatternSet::Explicit(patterns);
            }
            pos -= 1;
            counters[pos] += 1;
            if counters[pos] < per_node[pos].len() {
                break;
            }
            counters[pos] = 0;
        }
    }
}

/// Per-slot objective of a pattern (smaller is better): the weighted backlog
/// change of the bits each active link would move, plus `v` times the link
/// energy. Moves are capped by the pre-move backlog of the upstream node.
pub fn pattern_objective(
    graph: &TopologyGraph,
    state: &RoutingState,
    pattern: &ServicePattern,
    v: f64,
    energy_linear: f64,
    energy_quadratic: f64,
    slot_secs: f64,
) -> f64 {
    let queues = state.queues.lengths();
    let mut objective = 0.0;
    for (u, hop) in pattern.next_hop.iter().enumerate() {
        if let Some(idx) = hop {
            let link = &graph.links[*idx];
            debug_assert_eq!(link.from, u);
            let moved = queues[u].min(link.rate * slot_secs);
            objective += moved * (queues[link.to] - queues[u]);
            objective += v * (energy_quadratic * link.rate * link.rate + energy_linear * link.rate);
        }
    }
    objective
}

/// Greedy per-slot minimizer of [`pattern_objective`]: for each node, keep
/// the outgoing link with the largest positive weight
/// `(Q_u - Q_v) * min(Q_u, rate * dt) - v * energy(link)`, idling otherwise.
/// Ties break toward idle, then the lowest neighbor id.
pub fn backpressure_step(
    graph: &TopologyGraph,
    state: &RoutingState,
    sink: usize,
    v: f64,
    energy_linear: f64,
    energy_quadratic: f64,
    slot_secs: f64,
) -> ServicePattern {
    let queues = state.queues.lengths();
    let mut next_hop = vec![None; graph.node_count()];
    for (u, slot) in next_hop.iter_mut().enumerate() {
        if u == sink {
            continue;
        }
        let mut best_weight = 0.0;
        for &idx in graph.outgoing(u) {
            let link = &graph.links[idx];
            let moved = queues[u].min(link.rate * slot_secs);
            let weight = (queues[u] - queues[link.to]) * moved
                - v * (energy_quadratic * link.rate * link.rate + energy_linear * link.rate);
            // Strict improvement keeps idle on zero-weight ties and the
            // lowest-neighbor link on equal-weight ties (outgoing lists are
            // sorted by neighbor id).
            if weight > best_weight {
                best_weight = weight;
                *slot = Some(idx);
            }
        }
    }
    ServicePattern { next_hop }
}
