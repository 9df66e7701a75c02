//! The episode loop: wire an environment through a reward shaper into one of
//! the trainers, fully deterministic for a fixed seed.

use thiserror::Error;

use super::dqn::{DqnAgent, DqnConfig, ReplayItem};
use super::ppo::{PpoAgent, PpoConfig};
use super::TrajectoryBatch;
use crate::env::{ActionSpec, AgentAction, EnvError, Environment};
use crate::queue::{QueueError, RewardShaper};

#[derive(Debug, Clone, PartialEq)]
pub enum AgentConfig {
    Ppo(PpoConfig),
    Dqn(DqnConfig),
}

impl AgentConfig {
    pub fn max_episodes(&self) -> usize {
        match self {
            AgentConfig::Ppo(c) => c.max_episodes,
            AgentConfig::Dqn(c) => c.max_episodes,
        }
    }

    pub fn steps_per_episode(&self) -> usize {
        match self {
            AgentConfig::Ppo(c) => c.steps_per_episode,
            AgentConfig::Dqn(c) => c.steps_per_episode,
        }
    }

    pub fn reward_scale(&self) -> f64 {
        match self {
            AgentConfig::Ppo(c) => c.reward_scale,
            AgentConfig::Dqn(c) => c.reward_scale,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AgentConfig::Ppo(_) => "ppo",
            AgentConfig::Dqn(_) => "dqn",
        }
    }
}

/// Per-episode aggregates of the raw (unscaled) training signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_total_backlog: f64,
    pub mean_penalty: f64,
    /// Standard deviation over all (slot, queue) backlog samples in the
    /// episode.
    pub backlog_std: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at episode {episode}, update {update}")]
    NonFiniteLoss {
        episode: usize,
        update: usize,
        partial: Vec<EpisodeRecord>,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

/// A trained agent ready for greedy evaluation.
#[derive(Debug, Clone)]
pub enum TrainedAgent {
    Ppo(Box<PpoAgent>),
    Dqn(Box<DqnAgent>),
}

impl TrainedAgent {
    /// Deterministic action (policy mean / argmax Q) from a raw observation,
    /// normalized with the statistics frozen at the end of training.
    pub fn act_greedy(&self, raw_obs: &[f64]) -> AgentAction {
        match self {
            TrainedAgent::Ppo(agent) => {
                let norm = agent.obs_norm.normalize(raw_obs);
                agent.greedy_action(&norm)
            }
            TrainedAgent::Dqn(agent) => {
                let norm = agent.obs_norm.normalize(raw_obs);
                agent.action_map.to_action(&agent.greedy_choices(&norm))
            }
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub curve: Vec<EpisodeRecord>,
    pub agent: TrainedAgent,
}

struct EpisodeStats {
    rewards: f64,
    backlog_totals: f64,
    penalties: f64,
    backlog_samples: Vec<f64>,
    steps: usize,
}

impl EpisodeStats {
    fn new() -> Self {
        Self {
            rewards: 0.0,
            backlog_totals: 0.0,
            penalties: 0.0,
            backlog_samples: Vec::new(),
            steps: 0,
        }
    }

    fn push(&mut self, reward: f64, backlogs: &[f64], penalty: f64) {
        self.rewards += reward;
        self.backlog_totals += backlogs.iter().sum::<f64>();
        self.penalties += penalty;
        self.backlog_samples.extend_from_slice(backlogs);
        self.steps += 1;
    }

    fn record(&self, episode: usize) -> EpisodeRecord {
        let n = self.steps.max(1) as f64;
        let samples = self.backlog_samples.len().max(1) as f64;
        let mean = self.backlog_samples.iter().sum::<f64>() / samples;
        let var = self
            .backlog_samples
            .iter()
            .map(|q| (q - mean) * (q - mean))
            .sum::<f64>()
            / samples;
        EpisodeRecord {
            episode,
            mean_reward: self.rewards / n,
            mean_total_backlog: self.backlog_totals / n,
            mean_penalty: self.penalties / n,
            backlog_std: var.sqrt(),
        }
    }
}

fn clamp_to_spec(action: AgentAction, spec: &ActionSpec) -> AgentAction {
    match (action, spec) {
        (AgentAction::Continuous(mut v), ActionSpec::Box { low, high }) => {
            for (d, value) in v.iter_mut().enumerate() {
                *value = value.clamp(low[d], high[d]);
            }
            AgentAction::Continuous(v)
        }
        (other, _) => other,
    }
}

/// Train an agent in `env`, shaping rewards with `shaper`. Deterministic for
/// fixed `(env construction, cfg, seed)`. On a non-finite loss the run
/// aborts, preserving the records collected so far inside the error.
pub fn train(
    env: &mut dyn Environment,
    shaper: &RewardShaper,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    match cfg {
        AgentConfig::Ppo(ppo_cfg) => train_ppo(env, shaper, ppo_cfg, seed),
        AgentConfig::Dqn(dqn_cfg) => train_dqn(env, shaper, dqn_cfg, seed),
    }
}

fn train_ppo(
    env: &mut dyn Environment,
    shaper: &RewardShaper,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    let spec = env.action_spec();
    let mut agent = PpoAgent::new(env.obs_dim(), &spec, cfg.clone(), seed);
    let mut curve = Vec::with_capacity(cfg.max_episodes);

    for episode in 0..cfg.max_episodes {
        let mut raw_obs = env.reset();
        let mut batch = TrajectoryBatch::default();
        let mut stats = EpisodeStats::new();

        for _ in 0..cfg.steps_per_episode {
            agent.obs_norm.update(&raw_obs);
            let norm = agent.obs_norm.normalize(&raw_obs);
            let (action, stored, log_prob, value) = agent.sample_action(&norm);
            let action = clamp_to_spec(action, &spec);
            let tr = env.step(&action)?;
            let raw_reward = tr.shaped_reward(shaper)?;
            stats.push(raw_reward, tr.backlogs_after.lengths(), tr.penalty);
            batch.push(
                norm,
                stored,
                raw_reward * cfg.reward_scale,
                false,
                value,
                log_prob,
            );
            raw_obs = tr.next_obs;
        }

        // Time-limit truncation: bootstrap from the state we stopped in.
        let final_norm = agent.obs_norm.normalize(&raw_obs);
        batch.bootstrap_value = agent.state_value(&final_norm);

        if let Err(update) = agent.update(&batch) {
            return Err(TrainError::NonFiniteLoss {
                episode,
                update,
                partial: curve,
            });
        }
        curve.push(stats.record(episode));
    }

    Ok(TrainOutcome {
        curve,
        agent: TrainedAgent::Ppo(Box::new(agent)),
    })
}

fn train_dqn(
    env: &mut dyn Environment,
    shaper: &RewardShaper,
    cfg: &DqnConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    let spec = env.action_spec();
    let mut agent = DqnAgent::new(env.obs_dim(), &spec, cfg.clone(), seed);
    let mut curve = Vec::with_capacity(cfg.max_episodes);

    for episode in 0..cfg.max_episodes {
        let mut raw_obs = env.reset();
        let mut stats = EpisodeStats::new();

        for step in 0..cfg.steps_per_episode {
            agent.obs_norm.update(&raw_obs);
            let norm = agent.obs_norm.normalize(&raw_obs);
            let choices = agent.explore_choices(&norm);
            let action = clamp_to_spec(agent.action_map.to_action(&choices), &spec);
            let tr = env.step(&action)?;
            let raw_reward = tr.shaped_reward(shaper)?;
            stats.push(raw_reward, tr.backlogs_after.lengths(), tr.penalty);
            let next_norm = agent.obs_norm.normalize(&tr.next_obs);
            agent.replay.push(ReplayItem {
                obs: norm,
                choices,
                reward: raw_reward * cfg.reward_scale,
                next_obs: next_norm,
                done: false,
            });
            if agent.update().is_err() {
                return Err(TrainError::NonFiniteLoss {
                    episode,
                    update: episode * cfg.steps_per_episode + step,
                    partial: curve,
                });
            }
            raw_obs = tr.next_obs;
        }
        curve.push(stats.record(episode));
    }

    Ok(TrainOutcome {
        curve,
        agent: TrainedAgent::Dqn(Box::new(agent)),
    })
}
