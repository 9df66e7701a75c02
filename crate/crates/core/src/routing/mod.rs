//! Store-and-forward routing environment over random topologies.
//!
//! One commodity flows from a few source nodes toward a single absorbing
//! sink. Transfers are synchronous and slotted: every selected link moves up
//! to its capacity out of the upstream node's pre-move backlog, so bits
//! forwarded in a slot become servable at the next hop only in the next
//! slot. The per-slot penalty charges each active link a quadratic-plus-
//! linear function of its rate.

pub mod backpressure;
pub mod topology;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::env::{ActionSpec, AgentAction, EnvError, Environment, Transition};
use crate::queue::QueueVector;

pub use backpressure::{
    backpressure_step, enumerate_patterns, pattern_objective, PatternSet, ServicePattern,
    DEFAULT_PATTERN_CAP,
};
pub use topology::{
    generate_topology, min_cut_capacity, read_topology, write_topology, Link, TopologyGraph,
};

#[derive(Debug, Error)]
pub enum RoutingConfigError {
    #[error("{field} must be strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("link_prob must lie in [0, 1], got {0}")]
    LinkProb(f64),
    #[error("nearest_neighbors ({k}) must be smaller than nodes ({n})")]
    TooManyNeighbors { k: usize, n: usize },
    #[error("{field} must be nonnegative, got {value}")]
    Negative { field: &'static str, value: f64 },
}

/// Parameters of the routing experiment. Defaults follow the reference
/// setting (20 nodes, 5 nearest neighbors, 50% link probability); arrival
/// rate is the mean number of bits injected per source per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingConfig {
    pub nodes: usize,
    pub nearest_neighbors: usize,
    pub link_prob: f64,
    /// Mean link rate R_E, bits/s.
    pub mean_rate: f64,
    /// Mean injected bits per source per slot.
    pub arrival_rate: f64,
    /// Task sizes are uniform on (0, max_task_bits).
    pub max_task_bits: f64,
    /// Linear link energy coefficient, J per bit/s.
    pub energy_linear: f64,
    /// Quadratic link energy coefficient, J per (bit/s)^2.
    pub energy_quadratic: f64,
    /// Drift/penalty trade-off used by the max-weight baseline.
    pub v_weight: f64,
    pub slot_secs: f64,
    /// How many uniformly chosen source nodes inject traffic.
    pub sources: usize,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            nodes: 20,
            nearest_neighbors: 5,
            link_prob: 0.5,
            mean_rate: 1000.0,
            arrival_rate: 100.0,
            max_task_bits: 100.0,
            energy_linear: 1.0e-6,
            energy_quadratic: 1.0e-9,
            v_weight: 0.0,
            slot_secs: 1.0,
            sources: 3,
        }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<(), RoutingConfigError> {
        let positives = [
            ("nodes", self.nodes as f64),
            ("mean_rate", self.mean_rate),
            ("arrival_rate", self.arrival_rate),
            ("max_task_bits", self.max_task_bits),
            ("slot_secs", self.slot_secs),
            ("sources", self.sources as f64),
        ];
        for (field, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(RoutingConfigError::NotPositive { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.link_prob) {
            return Err(RoutingConfigError::LinkProb(self.link_prob));
        }
        if self.nearest_neighbors >= self.nodes {
            return Err(RoutingConfigError::TooManyNeighbors {
                k: self.nearest_neighbors,
                n: self.nodes,
            });
        }
        let nonnegatives = [
            ("energy_linear", self.energy_linear),
            ("energy_quadratic", self.energy_quadratic),
            ("v_weight", self.v_weight),
        ];
        for (field, value) in nonnegatives {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(RoutingConfigError::Negative { field, value });
            }
        }
        Ok(())
    }
}

/// Per-node backlogs destined for the sink. The sink entry is identically
/// zero at slot boundaries because it drains whatever reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingState {
    pub queues: QueueVector,
    pub slot: u64,
}

/// What one slot did: bits moved per link, fresh injections, and the energy
/// charge.
#[derive(Debug, Clone)]
pub struct RoutingSlotOutcome {
    /// (link index, bits moved) for each active link.
    pub moves: Vec<(usize, f64)>,
    /// Bits injected per source node this slot.
    pub injected: Vec<(usize, f64)>,
    /// Bits absorbed by the sink this slot.
    pub delivered: f64,
    pub energy: f64,
}

/// A seeded routing environment instance. The topology, sink, and source set
/// are fixed at construction; episodes reset only the queues.
#[derive(Debug, Clone)]
pub struct RoutingEnv {
    cfg: RoutingConfig,
    graph: TopologyGraph,
    sink: usize,
    sources: Vec<usize>,
    state: RoutingState,
    rng: ChaCha8Rng,
    /// Node ids with a categorical action head (every node except the sink).
    heads: Vec<usize>,
    total_injected: f64,
}

impl RoutingEnv {
    pub fn new(cfg: RoutingConfig, seed: u64) -> Result<Self, RoutingConfigError> {
        cfg.validate()?;
        let graph = generate_topology(seed, &cfg);
        // Separate stream so sink/source draws do not overlap the draws that
        // shaped the topology.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let sink = rng.random_range(0..cfg.nodes);
        let mut candidates: Vec<usize> = (0..cfg.nodes).filter(|&n| n != sink).collect();
        let mut sources = Vec::new();
        for _ in 0..cfg.sources.min(candidates.len()) {
            let pick = rng.random_range(0..candidates.len());
            sources.push(candidates.swap_remove(pick));
        }
        sources.sort_unstable();
        let heads = (0..cfg.nodes).filter(|&n| n != sink).collect();
        let state = RoutingState {
            queues: QueueVector::zeros(cfg.nodes),
            slot: 0,
        };
        Ok(Self {
            cfg,
            graph,
            sink,
            sources,
            state,
            rng,
            heads,
            total_injected: 0.0,
        })
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &TopologyGraph {
        &self.graph
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn state(&self) -> &RoutingState {
        &self.state
    }

    /// Cumulative bits injected since construction; differences of this
    /// counter feed the Little's-law latency estimate.
    pub fn total_injected(&self) -> f64 {
        self.total_injected
    }

    /// The max-weight pattern for the current state.
    pub fn baseline_pattern(&self) -> ServicePattern {
        backpressure_step(
            &self.graph,
            &self.state,
            self.sink,
            self.cfg.v_weight,
            self.cfg.energy_linear,
            self.cfg.energy_quadratic,
            self.cfg.slot_secs,
        )
    }

    fn validate_pattern(&self, pattern: &ServicePattern) -> Result<(), EnvError> {
        if pattern.next_hop.len() != self.cfg.nodes {
            return Err(EnvError::ActionShape {
                expected: self.cfg.nodes,
                actual: pattern.next_hop.len(),
            });
        }
        for (u, hop) in pattern.next_hop.iter().enumerate() {
            if let Some(idx) = hop {
                let valid = *idx < self.graph.links.len() && self.graph.links[*idx].from == u;
                if !valid || u == self.sink {
                    return Err(EnvError::InvalidChoice {
                        index: u,
                        choice: *idx,
                        choices: self.graph.links.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Advance one slot under the given pattern: synchronous capped moves,
    /// Poisson task injections at the sources, sink drain, link energy.
    pub fn step_pattern(
        &mut self,
        pattern: &ServicePattern,
    ) -> Result<(Transition, RoutingSlotOutcome), EnvError> {
        self.validate_pattern(pattern)?;
        let before = self.state.queues.clone();
        let obs = before.lengths().to_vec();
        let dt = self.cfg.slot_secs;

        let mut queues = before.lengths().to_vec();
        let mut moves = Vec::new();
        let mut energy = 0.0;
        for hop in pattern.next_hop.iter().flatten() {
            let link = &self.graph.links[*hop];
            let moved = before.lengths()[link.from].min(link.rate * dt);
            queues[link.from] -= moved;
            queues[link.to] += moved;
            moves.push((*hop, moved));
            energy += self.cfg.energy_quadratic * link.rate * link.rate
                + self.cfg.energy_linear * link.rate;
        }

        // Arrivals land after the moves and are servable next slot.
        let task_rate = self.cfg.arrival_rate / (self.cfg.max_task_bits / 2.0);
        let poisson = Poisson::new(task_rate).expect("positive rate");
        let mut injected = Vec::with_capacity(self.sources.len());
        for &source in &self.sources {
            let tasks = poisson.sample(&mut self.rng) as u64;
            let bits: f64 = (0..tasks)
                .map(|_| self.rng.random_range(0.0..self.cfg.max_task_bits))
                .sum();
            queues[source] += bits;
            self.total_injected += bits;
            injected.push((source, bits));
        }

        let delivered = queues[self.sink];
        queues[self.sink] = 0.0;
        // Guard against negative residue from floating-point subtraction.
        for q in &mut queues {
            if *q < 0.0 {
                *q = 0.0;
            }
        }

        self.state = RoutingState {
            queues: QueueVector::new(queues).expect("nonnegative backlog"),
            slot: self.state.slot + 1,
        };

        let transition = Transition {
            obs,
            action: pattern
                .next_hop
                .iter()
                .map(|h| h.map_or(-1.0, |idx| idx as f64))
                .collect(),
            next_obs: self.state.queues.lengths().to_vec(),
            penalty: energy,
            backlogs_before: before,
            backlogs_after: self.state.queues.clone(),
        };
        let outcome = RoutingSlotOutcome {
            moves,
            injected,
            delivered,
            energy,
        };
        Ok((transition, outcome))
    }

    /// Translate per-head categorical choices (0 = idle, i = the i-th
    /// outgoing link of that head's node) into a pattern.
    pub fn choices_to_pattern(&self, choices: &[usize]) -> Result<ServicePattern, EnvError> {
        if choices.len() != self.heads.len() {
            return Err(EnvError::ActionShape {
                expected: self.heads.len(),
                actual: choices.len(),
            });
        }
        let mut next_hop = vec![None; self.cfg.nodes];
        for (&node, &choice) in self.heads.iter().zip(choices) {
            let outgoing = self.graph.outgoing(node);
            if choice > outgoing.len() {
                return Err(EnvError::InvalidChoice {
                    index: node,
                    choice,
                    choices: outgoing.len() + 1,
                });
            }
            if choice > 0 {
                next_hop[node] = Some(outgoing[choice - 1]);
            }
        }
        Ok(ServicePattern { next_hop })
    }

    /// Inverse of [`RoutingEnv::choices_to_pattern`], used to drive the
    /// agent-facing interface with the max-weight baseline.
    pub fn pattern_to_choices(&self, pattern: &ServicePattern) -> Vec<usize> {
        self.heads
            .iter()
            .map(|&node| match pattern.next_hop[node] {
                None => 0,
                Some(idx) => {
                    self.graph
                        .outgoing(node)
                        .iter()
                        .position(|&l| l == idx)
                        .expect("link belongs to node")
                        + 1
                }
            })
            .collect()
    }
}

impl Environment for RoutingEnv {
    fn obs_dim(&self) -> usize {
        self.cfg.nodes
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::MultiCategorical {
            choices: self
                .heads
                .iter()
                .map(|&node| self.graph.outgoing(node).len() + 1)
                .collect(),
        }
    }

    fn queue_count(&self) -> usize {
        self.cfg.nodes
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = RoutingState {
            queues: QueueVector::zeros(self.cfg.nodes),
            slot: 0,
        };
        self.state.queues.lengths().to_vec()
    }

    fn step(&mut self, action: &AgentAction) -> Result<Transition, EnvError> {
        let choices = action.as_discrete()?;
        let pattern = self.choices_to_pattern(choices)?;
        self.step_pattern(&pattern)
            .map(|(transition, _)| transition)
    }
}

/// Little's-law latency estimate in slots: time-averaged total backlog over
/// time-averaged injected bits per slot. `None` when nothing arrived.
pub fn end_to_end_latency(backlog_totals: &[f64], injected_bits: &[f64]) -> Option<f64> {
    if backlog_totals.is_empty() || injected_bits.is_empty() {
        return None;
    }
    let mean_backlog = backlog_totals.iter().sum::<f64>() / backlog_totals.len() as f64;
    let mean_arrivals = injected_bits.iter().sum::<f64>() / injected_bits.len() as f64;
    if mean_arrivals <= 0.0 {
        return None;
    }
    Some(mean_backlog / mean_arrivals)
}
