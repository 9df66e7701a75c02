//! The environment interface shared by the simulators and the trainers.

use thiserror::Error;

use crate::queue::{QueueError, QueueVector, RewardShaper};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action has wrong shape: expected {expected}, got {actual}")]
    ActionShape { expected: usize, actual: usize },
    #[error("action component {index} = {value} violates bound [{low}, {high}]")]
    ActionBound {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("discrete action {index} selects choice {choice} of {choices}")]
    InvalidChoice {
        index: usize,
        choice: usize,
        choices: usize,
    },
    #[error("expected a {expected} action")]
    ActionKind { expected: &'static str },
}

/// Shape and bounds of an environment's action space.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpec {
    /// Per-dimension box constraints.
    Box { low: Vec<f64>, high: Vec<f64> },
    /// Independent categorical heads; `choices[h]` options for head `h`.
    MultiCategorical { choices: Vec<usize> },
}

impl ActionSpec {
    pub fn dims(&self) -> usize {
        match self {
            ActionSpec::Box { low, .. } => low.len(),
            ActionSpec::MultiCategorical { choices } => choices.len(),
        }
    }
}

/// An action as emitted by an agent, before the environment maps it onto
/// its own richer action type.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentAction {
    Continuous(Vec<f64>),
    Discrete(Vec<usize>),
}

impl AgentAction {
    pub fn as_continuous(&self) -> Result<&[f64], EnvError> {
        match self {
            AgentAction::Continuous(v) => Ok(v),
            AgentAction::Discrete(_) => Err(EnvError::ActionKind {
                expected: "continuous",
            }),
        }
    }

    pub fn as_discrete(&self) -> Result<&[usize], EnvError> {
        match self {
            AgentAction::Discrete(v) => Ok(v),
            AgentAction::Continuous(_) => Err(EnvError::ActionKind {
                expected: "discrete",
            }),
        }
    }

    /// Flat numeric view, used when recording transitions.
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            AgentAction::Continuous(v) => v.clone(),
            AgentAction::Discrete(v) => v.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// One environment step: observations around it, the action taken, the
/// penalty incurred, and the per-queue backlogs before and after. Rewards
/// are not stored here; the trainer derives them from the backlogs and the
/// penalty through whichever shaper is configured.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub penalty: f64,
    pub backlogs_before: QueueVector,
    pub backlogs_after: QueueVector,
}

impl Transition {
    /// The shaped reward of this transition: the shaper evaluated over the
    /// environment's full backlog vector (for the offloading system that is
    /// the user queues with the base-station queue appended) and the
    /// recorded penalty.
    pub fn shaped_reward(&self, shaper: &RewardShaper) -> Result<f64, QueueError> {
        shaper.reward(&self.backlogs_before, &self.backlogs_after, self.penalty)
    }
}

/// A discrete-time queueing environment. Instances are single-owner and
/// stepped sequentially; run distinct seeded instances for parallelism.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_spec(&self) -> ActionSpec;
    /// Length of the backlog vector recorded in transitions.
    fn queue_count(&self) -> usize;
    /// Restart the episode (queues to zero) and return the initial
    /// observation. The RNG stream continues across resets so trajectories
    /// stay deterministic for a fixed construction seed.
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &AgentAction) -> Result<Transition, EnvError>;
}
