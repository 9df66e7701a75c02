//! Replay-buffer Q-learning with a target network.
//!
//! Action spaces factor into independent heads: continuous dimensions are
//! discretized to a fixed number of levels per dimension, categorical heads
//! pass through. The Q network scores every head's choices from one trunk,
//! the temporal-difference target bootstraps each head's own maximum, and
//! the target network syncs on a fixed schedule.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::mlp::{Adam, Mlp};

#[derive(Debug, Error)]
#[error("temporal-difference loss became non-finite")]
pub struct NonFiniteLoss;
use super::RunningNorm;
use crate::env::{ActionSpec, AgentAction};

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub replay_capacity: usize,
    pub minibatch: usize,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    /// Copy the online network into the target every this many updates.
    pub target_sync_period: usize,
    pub learning_rate: f64,
    /// Levels per continuous action dimension.
    pub action_levels: usize,
    pub steps_per_episode: usize,
    pub max_episodes: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub reward_scale: f64,
    /// Environment steps collected before updates begin.
    pub warmup_steps: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            replay_capacity: 10_000,
            minibatch: 128,
            discount: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            target_sync_period: 250,
            learning_rate: 3e-4,
            action_levels: 5,
            steps_per_episode: 500,
            max_episodes: 1000,
            hidden_layers: 5,
            hidden_units: 64,
            reward_scale: 1e-5,
            warmup_steps: 500,
        }
    }
}

/// One stored transition, with actions kept as per-head choice indices.
#[derive(Debug, Clone)]
pub struct ReplayItem {
    pub obs: Vec<f64>,
    pub choices: Vec<usize>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO transition store: evicts oldest-first at capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<ReplayItem>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, item: ReplayItem) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> &ReplayItem {
        &self.items[index]
    }

    pub fn sample_indices<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        (0..count)
            .map(|_| rng.random_range(0..self.items.len()))
            .collect()
    }
}

/// How per-head choices map back onto the environment's action space.
#[derive(Debug, Clone)]
pub enum ActionMap {
    /// Level k of head d maps to `low + (high - low) * k / (levels - 1)`.
    Discretized {
        low: Vec<f64>,
        high: Vec<f64>,
        levels: usize,
    },
    Passthrough,
}

impl ActionMap {
    pub fn to_action(&self, choices: &[usize]) -> AgentAction {
        match self {
            ActionMap::Discretized { low, high, levels } => AgentAction::Continuous(
                choices
                    .iter()
                    .enumerate()
                    .map(|(d, &k)| low[d] + (high[d] - low[d]) * k as f64 / (*levels as f64 - 1.0))
                    .collect(),
            ),
            ActionMap::Passthrough => AgentAction::Discrete(choices.to_vec()),
        }
    }
}

/// Mean squared temporal-difference error over a sampled minibatch, plus
/// its analytic gradient in the online network's parameters. The target
/// network is held fixed.
pub fn dqn_loss_and_grads(
    online: &Mlp,
    target: &Mlp,
    heads: &[usize],
    replay: &ReplayBuffer,
    indices: &[usize],
    discount: f64,
) -> (f64, Vec<f64>) {
    let denom = (indices.len() * heads.len()) as f64;
    let mut loss = 0.0;
    let mut grads = online.zero_grads();
    for &idx in indices {
        let item = replay.get(idx);
        let cache = online.forward_cached(&item.obs);
        let q = cache.acts.last().unwrap();
        let next_q = if item.done {
            Vec::new()
        } else {
            target.forward(&item.next_obs)
        };
        let mut dout = vec![0.0; q.len()];
        let mut offset = 0;
        for (h, &size) in heads.iter().enumerate() {
            let chosen = offset + item.choices[h];
            let bootstrap = if item.done {
                0.0
            } else {
                next_q[offset..offset + size]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let td_target = item.reward + discount * bootstrap;
            let error = q[chosen] - td_target;
            loss += error * error / denom;
            dout[chosen] = 2.0 * error / denom;
            offset += size;
        }
        online.backward(&cache, &dout, &mut grads);
    }
    (loss, grads.flatten())
}

/// Q-learning agent over factored heads.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: Mlp,
    pub target: Mlp,
    pub heads: Vec<usize>,
    pub action_map: ActionMap,
    pub cfg: DqnConfig,
    pub obs_norm: RunningNorm,
    pub replay: ReplayBuffer,
    opt: Adam,
    rng: ChaCha8Rng,
    pub env_steps: usize,
    pub updates: usize,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, spec: &ActionSpec, cfg: DqnConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(8);
        let (heads, action_map) = match spec {
            ActionSpec::Box { low, high } => (
                vec![cfg.action_levels; low.len()],
                ActionMap::Discretized {
                    low: low.clone(),
                    high: high.clone(),
                    levels: cfg.action_levels,
                },
            ),
            ActionSpec::MultiCategorical { choices } => (choices.clone(), ActionMap::Passthrough),
        };
        let outputs: usize = heads.iter().sum();
        let online = Mlp::with_hidden(
            obs_dim,
            cfg.hidden_layers,
            cfg.hidden_units,
            outputs,
            &mut rng,
        );
        let target = online.clone();
        let opt = Adam::new(cfg.learning_rate, online.param_count());
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        Self {
            online,
            target,
            heads,
            action_map,
            cfg,
            obs_norm: RunningNorm::new(obs_dim),
            replay,
            opt,
            rng,
            env_steps: 0,
            updates: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        let progress =
            (self.env_steps as f64 / self.cfg.epsilon_decay_steps as f64).clamp(0.0, 1.0);
        self.cfg.epsilon_start + (self.cfg.epsilon_end - self.cfg.epsilon_start) * progress
    }

    /// Epsilon-greedy per head.
    pub fn explore_choices(&mut self, norm_obs: &[f64]) -> Vec<usize> {
        let epsilon = self.epsilon();
        let q = self.online.forward(norm_obs);
        let mut offset = 0;
        let mut choices = Vec::with_capacity(self.heads.len());
        for &size in &self.heads.clone() {
            let pick = if self.rng.random_range(0.0..1.0) < epsilon {
                self.rng.random_range(0..size)
            } else {
                argmax(&q[offset..offset + size])
            };
            choices.push(pick);
            offset += size;
        }
        self.env_steps += 1;
        choices
    }

    pub fn greedy_choices(&self, norm_obs: &[f64]) -> Vec<usize> {
        let q = self.online.forward(norm_obs);
        let mut offset = 0;
        self.heads
            .iter()
            .map(|&size| {
                let pick = argmax(&q[offset..offset + size]);
                offset += size;
                pick
            })
            .collect()
    }

    /// One temporal-difference step on a uniform minibatch; syncs the target
    /// network on schedule. No-op until the replay holds a minibatch and the
    /// warmup has elapsed. Returns the loss.
    pub fn update(&mut self) -> Result<Option<f64>, NonFiniteLoss> {
        if self.replay.len() < self.cfg.minibatch || self.env_steps < self.cfg.warmup_steps {
            return Ok(None);
        }
        let indices = self
            .replay
            .sample_indices(self.cfg.minibatch, &mut self.rng);
        let (loss, grads) = dqn_loss_and_grads(
            &self.online,
            &self.target,
            &self.heads,
            &self.replay,
            &indices,
            self.cfg.discount,
        );
        if !loss.is_finite() {
            return Err(NonFiniteLoss);
        }
        let mut params = self.online.flatten();
        self.opt.step(&mut params, &grads);
        self.online.unflatten(&params);
        self.updates += 1;
        if self.updates % self.cfg.target_sync_period == 0 {
            self.target = self.online.clone();
        }
        Ok(Some(loss))
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
