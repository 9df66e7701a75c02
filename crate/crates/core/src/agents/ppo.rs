//! Clipped-surrogate actor-critic training.
//!
//! The actor and critic are separate trunks. Updates run a few epochs of
//! shuffled minibatches over one rollout; advantages come from generalized
//! advantage estimation and are normalized per update. All loss gradients
//! are hand-derived, which is what lets the finite-difference checks pin
//! them down.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{Adam, Mlp};
use super::policy::{CategoricalPolicy, GaussianPolicy};
use super::{RunningNorm, StoredAction, TrajectoryBatch};
use crate::env::{ActionSpec, AgentAction};

/// Hyperparameters for the clipped-surrogate trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub epochs_per_update: usize,
    pub minibatch: usize,
    pub steps_per_episode: usize,
    pub max_episodes: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    /// Fixed reward scaling applied inside the agent so typical magnitudes
    /// are O(1); curves and metrics always report raw rewards.
    pub reward_scale: f64,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            discount: 0.95,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            epochs_per_update: 4,
            minibatch: 128,
            steps_per_episode: 500,
            max_episodes: 1000,
            hidden_layers: 5,
            hidden_units: 64,
            reward_scale: 1e-5,
            init_log_std: -0.5,
        }
    }
}

/// Actor network over either action space.
#[derive(Debug, Clone)]
pub enum PolicyNet {
    Gaussian(GaussianPolicy),
    Categorical(CategoricalPolicy),
}

impl PolicyNet {
    pub fn for_spec<R: Rng>(
        obs_dim: usize,
        spec: &ActionSpec,
        cfg: &PpoConfig,
        rng: &mut R,
    ) -> Self {
        match spec {
            ActionSpec::Box { low, high } => PolicyNet::Gaussian(GaussianPolicy::new(
                obs_dim,
                cfg.hidden_layers,
                cfg.hidden_units,
                low.clone(),
                high.clone(),
                cfg.init_log_std,
                rng,
            )),
            ActionSpec::MultiCategorical { choices } => {
                PolicyNet::Categorical(CategoricalPolicy::new(
                    obs_dim,
                    cfg.hidden_layers,
                    cfg.hidden_units,
                    choices.clone(),
                    rng,
                ))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            PolicyNet::Gaussian(p) => p.param_count(),
            PolicyNet::Categorical(p) => p.param_count(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            PolicyNet::Gaussian(p) => p.flatten(),
            PolicyNet::Categorical(p) => p.trunk.flatten(),
        }
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        match self {
            PolicyNet::Gaussian(p) => p.unflatten(flat),
            PolicyNet::Categorical(p) => p.trunk.unflatten(flat),
        }
    }

    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> (AgentAction, StoredAction, f64) {
        match self {
            PolicyNet::Gaussian(p) => {
                let (action, pre, lp) = p.sample(obs, rng);
                (
                    AgentAction::Continuous(action),
                    StoredAction::Continuous(pre),
                    lp,
                )
            }
            PolicyNet::Categorical(p) => {
                let (choices, lp) = p.sample(obs, rng);
                (
                    AgentAction::Discrete(choices.clone()),
                    StoredAction::Discrete(choices),
                    lp,
                )
            }
        }
    }

    pub fn greedy(&self, obs: &[f64]) -> AgentAction {
        match self {
            PolicyNet::Gaussian(p) => AgentAction::Continuous(p.greedy(obs)),
            PolicyNet::Categorical(p) => AgentAction::Discrete(p.greedy(obs)),
        }
    }
}

/// Generalized advantage estimates for one rollout. `bootstrap` is the value
/// of the state after the final step; terminal steps mask it out.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { bootstrap } else { values[t + 1] };
        let delta = rewards[t] + discount * cont * next_value - values[t];
        carry = delta + discount * lambda * cont * carry;
        advantages[t] = carry;
    }
    advantages
}

/// Total loss and its analytic gradients for one minibatch: the clipped
/// surrogate plus the value regression term minus the entropy bonus.
/// Gradient vectors are flat, matching `PolicyNet::flatten` and
/// `Mlp::flatten`.
pub fn ppo_loss_and_grads(
    policy: &PolicyNet,
    value: &Mlp,
    batch: &TrajectoryBatch,
    indices: &[usize],
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
) -> (f64, Vec<f64>, Vec<f64>) {
    let b = indices.len() as f64;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy_term = 0.0;

    let mut value_grads = value.zero_grads();

    let (mut trunk_grads, mut log_std_grads) = match policy {
        PolicyNet::Gaussian(p) => (p.trunk.zero_grads(), vec![0.0; p.log_std.len()]),
        PolicyNet::Categorical(p) => (p.trunk.zero_grads(), Vec::new()),
    };

    for &i in indices {
        let obs = &batch.obs[i];
        let advantage = advantages[i];
        let old_lp = batch.log_probs[i];

        // Critic term.
        let vcache = value.forward_cached(obs);
        let v = vcache.acts.last().unwrap()[0];
        value_loss += (v - returns[i]) * (v - returns[i]) / b;
        let dv = cfg.value_coef * 2.0 * (v - returns[i]) / b;
        value.backward(&vcache, &[dv], &mut value_grads);

        // Actor term.
        match policy {
            PolicyNet::Gaussian(p) => {
                let StoredAction::Continuous(pre) = &batch.actions[i] else {
                    panic!("gaussian policy requires continuous stored actions");
                };
                let cache = p.trunk.forward_cached(obs);
                let mean = cache.acts.last().unwrap().clone();
                let new_lp = p.log_prob_given_mean(&mean, pre);
                let ratio = (new_lp - old_lp).exp();
                let (surrogate, dsurr_dratio) =
                    clipped_surrogate(ratio, advantage, cfg.clip_epsilon);
                policy_loss -= surrogate / b;
                let dl_dlp = -dsurr_dratio * ratio / b;

                let mut dmean = vec![0.0; mean.len()];
                for d in 0..mean.len() {
                    let sigma = p.log_std[d].exp();
                    let z = (pre[d] - mean[d]) / sigma;
                    dmean[d] = dl_dlp * z / sigma;
                    log_std_grads[d] += dl_dlp * (z * z - 1.0);
                }
                p.trunk.backward(&cache, &dmean, &mut trunk_grads);
            }
            PolicyNet::Categorical(p) => {
                let StoredAction::Discrete(choices) = &batch.actions[i] else {
                    panic!("categorical policy requires discrete stored actions");
                };
                let cache = p.trunk.forward_cached(obs);
                let logits = cache.acts.last().unwrap().clone();
                let probs = p.head_probs(&logits);
                let new_lp = p.log_prob_of_choices(&logits, choices);
                let ratio = (new_lp - old_lp).exp();
                let (surrogate, dsurr_dratio) =
                    clipped_surrogate(ratio, advantage, cfg.clip_epsilon);
                policy_loss -= surrogate / b;
                let dl_dlp = -dsurr_dratio * ratio / b;

                let mut dlogits = vec![0.0; logits.len()];
                let mut offset = 0;
                for (h, head) in probs.iter().enumerate() {
                    let head_entropy: f64 =
                        -head.iter().map(|&p| p * p.max(1e-300).ln()).sum::<f64>();
                    entropy_term += head_entropy / b;
                    for (k, &prob) in head.iter().enumerate() {
                        let indicator = if k == choices[h] { 1.0 } else { 0.0 };
                        // Surrogate pull plus the entropy bonus pull.
                        dlogits[offset + k] = dl_dlp * (indicator - prob)
                            + cfg.entropy_coef / b * prob * (prob.max(1e-300).ln() + head_entropy);
                    }
                    offset += head.len();
                }
                p.trunk.backward(&cache, &dlogits, &mut trunk_grads);
            }
        }
    }

    if let PolicyNet::Gaussian(p) = policy {
        // State-independent entropy: one bonus, gradient 1 per log-std.
        entropy_term = p.entropy();
        for g in &mut log_std_grads {
            *g -= cfg.entropy_coef;
        }
    }

    let total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_term;
    let mut policy_flat = trunk_grads.flatten();
    policy_flat.extend_from_slice(&log_std_grads);
    (total, policy_flat, value_grads.flatten())
}

/// The clipped surrogate and its derivative in the ratio. On the clipped
/// branch outside the trust region the derivative is exactly zero.
fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> (f64, f64) {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    let s1 = ratio * advantage;
    let s2 = clipped * advantage;
    if s1 <= s2 {
        (s1, advantage)
    } else {
        let inside = ratio > 1.0 - epsilon && ratio < 1.0 + epsilon;
        (s2, if inside { advantage } else { 0.0 })
    }
}

/// One actor-critic learner: policy, value net, optimizers, and the
/// observation normalizer.
///
/// The critic regresses standardized return targets; `ret_mean`/`ret_std`
/// map its unit-scale output back to raw returns, which keeps learning
/// conditioned even when a shaper's return magnitude is in the thousands.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub policy: PolicyNet,
    pub value: Mlp,
    pub cfg: PpoConfig,
    pub obs_norm: RunningNorm,
    pub ret_mean: f64,
    pub ret_std: f64,
    opt_policy: Adam,
    opt_value: Adam,
    rng: ChaCha8Rng,
    pub updates: usize,
}

impl PpoAgent {
    pub fn new(obs_dim: usize, spec: &ActionSpec, cfg: PpoConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let policy = PolicyNet::for_spec(obs_dim, spec, &cfg, &mut rng);
        let value = Mlp::with_hidden(obs_dim, cfg.hidden_layers, cfg.hidden_units, 1, &mut rng);
        let opt_policy = Adam::new(cfg.learning_rate, policy.param_count());
        let opt_value = Adam::new(cfg.learning_rate, value.param_count());
        Self {
            policy,
            value,
            cfg,
            obs_norm: RunningNorm::new(obs_dim),
            ret_mean: 0.0,
            ret_std: 1.0,
            opt_policy,
            opt_value,
            rng,
            updates: 0,
        }
    }

    /// Critic estimate in raw return units.
    pub fn state_value(&self, norm_obs: &[f64]) -> f64 {
        self.value.forward(norm_obs)[0] * self.ret_std + self.ret_mean
    }

    pub fn sample_action(&mut self, norm_obs: &[f64]) -> (AgentAction, StoredAction, f64, f64) {
        let (action, stored, lp) = self.policy.sample(norm_obs, &mut self.rng);
        let value = self.state_value(norm_obs);
        (action, stored, lp, value)
    }

    pub fn greedy_action(&self, norm_obs: &[f64]) -> AgentAction {
        self.policy.greedy(norm_obs)
    }

    /// One full update over a rollout: GAE, advantage normalization, then
    /// epochs of shuffled minibatches over standardized return targets.
    /// Returns the index of the first minibatch whose loss went non-finite,
    /// if any.
    pub fn update(&mut self, batch: &TrajectoryBatch) -> Result<(), usize> {
        let values = &batch.values;
        let mut advantages = gae_advantages(
            &batch.rewards,
            values,
            &batch.dones,
            batch.bootstrap_value,
            self.cfg.discount,
            self.cfg.gae_lambda,
        );
        let returns_raw: Vec<f64> = advantages.iter().zip(values).map(|(a, v)| a + v).collect();

        // Track the raw return scale and fit the critic in standardized
        // units. The first update adopts the batch statistics outright.
        let batch_mean = returns_raw.iter().sum::<f64>() / returns_raw.len() as f64;
        let batch_var = returns_raw
            .iter()
            .map(|r| (r - batch_mean) * (r - batch_mean))
            .sum::<f64>()
            / returns_raw.len() as f64;
        let batch_std = batch_var.sqrt().max(1e-6);
        if self.updates == 0 {
            self.ret_mean = batch_mean;
            self.ret_std = batch_std;
        } else {
            self.ret_mean = 0.9 * self.ret_mean + 0.1 * batch_mean;
            self.ret_std = 0.9 * self.ret_std + 0.1 * batch_std;
        }
        let returns: Vec<f64> = returns_raw
            .iter()
            .map(|r| (r - self.ret_mean) / self.ret_std)
            .collect();

        let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
        let var = advantages
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / advantages.len() as f64;
        let std = var.sqrt().max(1e-8);
        for a in &mut advantages {
            *a = (*a - mean) / std;
        }

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut update_index = 0;
        for _ in 0..self.cfg.epochs_per_update {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.minibatch) {
                let (loss, pgrads, vgrads) = ppo_loss_and_grads(
                    &self.policy,
                    &self.value,
                    batch,
                    chunk,
                    &advantages,
                    &returns,
                    &self.cfg,
                );
                if !loss.is_finite() {
                    return Err(update_index);
                }
                let mut pparams = self.policy.flatten();
                self.opt_policy.step(&mut pparams, &pgrads);
                self.policy.unflatten(&pparams);
                let mut vparams = self.value.flatten();
                self.opt_value.step(&mut vparams, &vgrads);
                self.value.unflatten(&vparams);
                update_index += 1;
            }
        }
        self.updates += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_with_unit_lambda_reduces_to_discounted_returns_minus_values() {
        use super::super::discounted_returns;
        let rewards = [1.0, -0.5, 2.0, 0.3, 1.1];
        let values = [0.2, 0.4, -0.1, 0.0, 0.6];
        let dones = [false, false, true, false, false];
        let bootstrap = 0.7;
        let adv = gae_advantages(&rewards, &values, &dones, bootstrap, 0.9, 1.0);
        let returns = discounted_returns(&rewards, &dones, bootstrap, 0.9);
        for t in 0..rewards.len() {
            assert!((adv[t] - (returns[t] - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_arithmetic_matches_the_definition() {
        // ratio 1.5 with eps 0.2 and positive advantage clips to 1.2 * A.
        let (s, d) = clipped_surrogate(1.5, 2.0, 0.2);
        assert_eq!(s, 1.2 * 2.0);
        assert_eq!(d, 0.0, "clipped branch is flat in the ratio");
        // Inside the trust region the surrogate is linear in the ratio.
        let (s, d) = clipped_surrogate(1.1, 2.0, 0.2);
        assert_eq!(s, 1.1 * 2.0);
        assert_eq!(d, 2.0);
        // Negative advantage keeps the pessimistic unclipped branch.
        let (s, d) = clipped_surrogate(1.5, -2.0, 0.2);
        assert_eq!(s, -3.0);
        assert_eq!(d, -2.0);
    }

    fn tiny_batch(continuous: bool, seed: u64) -> (PolicyNet, Mlp, TrajectoryBatch, PpoConfig) {
        use rand::Rng;
        let cfg = PpoConfig {
            hidden_layers: 1,
            hidden_units: 4,
            ..PpoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if continuous {
            ActionSpec::Box {
                low: vec![0.0, -1.0],
                high: vec![2.0, 1.0],
            }
        } else {
            ActionSpec::MultiCategorical {
                choices: vec![3, 2],
            }
        };
        let policy = PolicyNet::for_spec(3, &spec, &cfg, &mut rng);
        let value = Mlp::with_hidden(3, 1, 4, 1, &mut rng);
        let mut batch = TrajectoryBatch::default();
        let mut sample_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xFFFF);
        for t in 0..6 {
            let obs: Vec<f64> = (0..3).map(|_| sample_rng.random_range(-1.0..1.0)).collect();
            let (_, stored, lp) = policy.sample(&obs, &mut sample_rng);
            let v = value.forward(&obs)[0];
            batch.obs.push(obs);
            batch.actions.push(stored);
            batch.rewards.push(sample_rng.random_range(-1.0..1.0));
            batch.dones.push(t == 5);
            batch.values.push(v);
            // Perturb the stored log-prob so ratios are spread around 1.
            batch
                .log_probs
                .push(lp + sample_rng.random_range(-0.05..0.05));
        }
        batch.bootstrap_value = 0.0;
        (policy, value, batch, cfg)
    }

    /// Central finite differences over every parameter of the total loss.
    fn finite_difference_check(continuous: bool, seed: u64) {
        let (mut policy, mut value, batch, cfg) = tiny_batch(continuous, seed);
        let advantages = gae_advantages(
            &batch.rewards,
            &batch.values,
            &batch.dones,
            batch.bootstrap_value,
            cfg.discount,
            cfg.gae_lambda,
        );
        let returns: Vec<f64> = advantages
            .iter()
            .zip(&batch.values)
            .map(|(a, v)| a + v)
            .collect();
        let indices: Vec<usize> = (0..batch.len()).collect();

        let (_, pgrads, vgrads) = ppo_loss_and_grads(
            &policy,
            &value,
            &batch,
            &indices,
            &advantages,
            &returns,
            &cfg,
        );

        let h = 1e-5;
        let p0 = policy.flatten();
        for idx in 0..p0.len() {
            let mut plus = p0.clone();
            plus[idx] += h;
            policy.unflatten(&plus);
            let (lp, _, _) = ppo_loss_and_grads(
                &policy,
                &value,
                &batch,
                &indices,
                &advantages,
                &returns,
                &cfg,
            );
            let mut minus = p0.clone();
            minus[idx] -= h;
            policy.unflatten(&minus);
            let (lm, _, _) = ppo_loss_and_grads(
                &policy,
                &value,
                &batch,
                &indices,
                &advantages,
                &returns,
                &cfg,
            );
            policy.unflatten(&p0);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = numeric.abs().max(pgrads[idx].abs()).max(1e-6);
            assert!(
                (numeric - pgrads[idx]).abs() / denom < 1e-4,
                "policy param {idx}: numeric {numeric} vs analytic {}",
                pgrads[idx]
            );
        }

        let v0 = value.flatten();
        for idx in 0..v0.len() {
            let mut plus = v0.clone();
            plus[idx] += h;
            value.unflatten(&plus);
            let (lp, _, _) = ppo_loss_and_grads(
                &policy,
                &value,
                &batch,
                &indices,
                &advantages,
                &returns,
                &cfg,
            );
            let mut minus = v0.clone();
            minus[idx] -= h;
            value.unflatten(&minus);
            let (lm, _, _) = ppo_loss_and_grads(
                &policy,
                &value,
                &batch,
                &indices,
                &advantages,
                &returns,
                &cfg,
            );
            value.unflatten(&v0);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = numeric.abs().max(vgrads[idx].abs()).max(1e-6);
            assert!(
                (numeric - vgrads[idx]).abs() / denom < 1e-4,
                "value param {idx}: numeric {numeric} vs analytic {}",
                vgrads[idx]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_continuous() {
        finite_difference_check(true, 1);
    }

    #[test]
    fn gradients_match_finite_differences_categorical() {
        finite_difference_check(false, 2);
    }

    #[test]
    fn zero_advantages_leave_the_surrogate_gradient_at_zero() {
        let (policy, value, batch, cfg) = tiny_batch(true, 3);
        let advantages = vec![0.0; batch.len()];
        let returns = batch.values.clone();
        let indices: Vec<usize> = (0..batch.len()).collect();
        let cfg_no_extras = PpoConfig {
            entropy_coef: 0.0,
            value_coef: 0.0,
            ..cfg
        };
        let (loss, pgrads, _) = ppo_loss_and_grads(
            &policy,
            &value,
            &batch,
            &indices,
            &advantages,
            &returns,
            &cfg_no_extras,
        );
        assert!(loss.abs() < 1e-12);
        assert!(pgrads.iter().all(|g| g.abs() < 1e-12));
    }
}
