//! Self-contained function-approximation RL: a small fully connected
//! network, a clipped-surrogate actor-critic trainer, and a replay-buffer
//! Q-learning trainer. No external learning framework; every gradient is
//! hand-derived and checked against finite differences.

pub mod checkpoint;
pub mod dqn;
pub mod mlp;
pub mod policy;
pub mod ppo;
mod train;

pub use dqn::{dqn_loss_and_grads, ActionMap, DqnAgent, DqnConfig, ReplayBuffer, ReplayItem};
pub use mlp::{Adam, Mlp, MlpGrads};
pub use policy::{CategoricalPolicy, GaussianPolicy};
pub use ppo::{gae_advantages, ppo_loss_and_grads, PolicyNet, PpoAgent, PpoConfig};
pub use train::{train, AgentConfig, EpisodeRecord, TrainError, TrainOutcome, TrainedAgent};

/// Action as stored for later density recomputation: the pre-squash draw
/// for Gaussian policies, the per-head choices for categorical ones.
#[derive(Debug, Clone)]
pub enum StoredAction {
    Continuous(Vec<f64>),
    Discrete(Vec<usize>),
}

/// Time-ordered rollout records for one update.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<StoredAction>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Value of the state after the final step, used when the rollout ends
    /// by truncation rather than termination.
    pub bootstrap_value: f64,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn push(
        &mut self,
        obs: Vec<f64>,
        action: StoredAction,
        reward: f64,
        done: bool,
        value: f64,
        log_prob: f64,
    ) {
        self.obs.push(obs);
        self.actions.push(action);
        self.rewards.push(reward);
        self.dones.push(done);
        self.values.push(value);
        self.log_probs.push(log_prob);
    }
}

/// Discounted returns with done masking and a bootstrap tail.
pub fn discounted_returns(
    rewards: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let mut returns = vec![0.0; n];
    let mut carry = bootstrap;
    for t in (0..n).rev() {
        carry = rewards[t] + discount * if dones[t] { 0.0 } else { carry };
        returns[t] = carry;
    }
    returns
}

/// Per-dimension running mean/variance normalization of observations.
#[derive(Debug, Clone)]
pub struct RunningNorm {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dims: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dims],
            m2: vec![0.0; dims],
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        for d in 0..self.mean.len() {
            let delta = x[d] - self.mean[d];
            self.mean[d] += delta / self.count as f64;
            self.m2[d] += delta * (x[d] - self.mean[d]);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(d, &v)| {
                let var = if self.count > 1 {
                    self.m2[d] / self.count as f64
                } else {
                    1.0
                };
                (v - self.mean[d]) / (var + 1e-8).sqrt()
            })
            .collect()
    }

    pub fn state(&self) -> (u64, &[f64], &[f64]) {
        (self.count, &self.mean, &self.m2)
    }

    pub fn restore(&mut self, count: u64, mean: Vec<f64>, m2: Vec<f64>) {
        self.count = count;
        self.mean = mean;
        self.m2 = m2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent O(T^2) reference: re-run the tail recursion from scratch
    /// for every index.
    fn brute_force_returns(
        rewards: &[f64],
        dones: &[bool],
        bootstrap: f64,
        discount: f64,
    ) -> Vec<f64> {
        (0..rewards.len())
            .map(|t| {
                let mut acc = bootstrap;
                for k in (t..rewards.len()).rev() {
                    acc = rewards[k] + discount * if dones[k] { 0.0 } else { acc };
                }
                acc
            })
            .collect()
    }

    #[test]
    fn discounted_returns_match_brute_force_exactly() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let dones: Vec<bool> = (0..n).map(|_| rng.random_range(0.0..1.0) < 0.15).collect();
            let bootstrap = rng.random_range(-2.0..2.0);
            let fast = discounted_returns(&rewards, &dones, bootstrap, 0.95);
            let slow = brute_force_returns(&rewards, &dones, bootstrap, 0.95);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn running_norm_tracks_mean_and_variance() {
        let mut norm = RunningNorm::new(1);
        for x in [2.0, 4.0, 6.0, 8.0] {
            norm.update(&[x]);
        }
        let z = norm.normalize(&[5.0]);
        // mean 5, population variance 5.
        assert!((z[0] - 0.0).abs() < 1e-9);
        let z = norm.normalize(&[5.0 + 5.0f64.sqrt()]);
        assert!((z[0] - 1.0).abs() < 1e-6);
    }
}
