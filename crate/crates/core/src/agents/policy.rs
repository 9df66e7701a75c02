//! Stochastic policies over box and multi-categorical action spaces.
//!
//! Continuous actions come from a diagonal Gaussian with a state-independent
//! learned log standard deviation, squashed onto the action box through
//! tanh; the log-density includes the change-of-variables correction.
//! Discrete actions come from independent categorical heads sharing one
//! trunk.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::Mlp;

pub const LN_2PI: f64 = 1.8378770664093453;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - tanh(u)^2)` in a form stable for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Squash an unbounded pre-action onto `[low, high]`.
pub fn squash(u: f64, low: f64, high: f64) -> f64 {
    low + (high - low) * 0.5 * (u.tanh() + 1.0)
}

/// Inverse of [`squash`]; clamps slightly inside the box to stay finite.
pub fn unsquash(a: f64, low: f64, high: f64) -> f64 {
    let t = (2.0 * (a - low) / (high - low) - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    0.5 * ((1.0 + t) / (1.0 - t)).ln()
}

/// Gaussian policy squashed onto a box: the trunk outputs per-dimension
/// means in pre-squash space.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    pub trunk: Mlp,
    pub log_std: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng>(
        obs_dim: usize,
        hidden_layers: usize,
        hidden_units: usize,
        low: Vec<f64>,
        high: Vec<f64>,
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        assert_eq!(low.len(), high.len());
        let mut trunk = Mlp::with_hidden(obs_dim, hidden_layers, hidden_units, low.len(), rng);
        // Start near-deterministic around the box midpoint.
        trunk.scale_last_layer(0.01);
        Self {
            trunk,
            log_std: vec![init_log_std; low.len()],
            low,
            high,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.low.len()
    }

    /// Sample an action; returns the squashed action, the pre-squash draw
    /// (stored for later density recomputation), and the log-density of the
    /// action including the squashing correction.
    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>, f64) {
        let mean = self.trunk.forward(obs);
        let mut pre = Vec::with_capacity(mean.len());
        for (d, &mu) in mean.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            pre.push(mu + self.log_std[d].exp() * z);
        }
        let action = self.squash_all(&pre);
        let log_prob = self.log_prob_given_mean(&mean, &pre);
        (action, pre, log_prob)
    }

    /// Deterministic action: the squashed mean.
    pub fn greedy(&self, obs: &[f64]) -> Vec<f64> {
        self.squash_all(&self.trunk.forward(obs))
    }

    pub fn squash_all(&self, pre: &[f64]) -> Vec<f64> {
        pre.iter()
            .enumerate()
            .map(|(d, &u)| squash(u, self.low[d], self.high[d]))
            .collect()
    }

    /// Log-density of the squashed action identified by its pre-squash
    /// value, for a given trunk output.
    pub fn log_prob_given_mean(&self, mean: &[f64], pre: &[f64]) -> f64 {
        let mut lp = 0.0;
        for d in 0..pre.len() {
            let sigma = self.log_std[d].exp();
            let z = (pre[d] - mean[d]) / sigma;
            lp += -0.5 * z * z - self.log_std[d] - 0.5 * LN_2PI;
            lp -= ((self.high[d] - self.low[d]) * 0.5).ln() + log_one_minus_tanh_sq(pre[d]);
        }
        lp
    }

    /// Log-density of a boxed action under the current policy.
    pub fn log_prob_of_action(&self, obs: &[f64], action: &[f64]) -> f64 {
        let mean = self.trunk.forward(obs);
        let pre: Vec<f64> = action
            .iter()
            .enumerate()
            .map(|(d, &a)| unsquash(a, self.low[d], self.high[d]))
            .collect();
        self.log_prob_given_mean(&mean, &pre)
    }

    /// Entropy of the underlying Gaussian (the bonus term ignores the
    /// squashing correction, whose expectation has no closed form).
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| ls + 0.5 * (LN_2PI + 1.0))
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.log_std.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = self.trunk.flatten();
        flat.extend_from_slice(&self.log_std);
        flat
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let split = self.trunk.param_count();
        self.trunk.unflatten(&flat[..split]);
        self.log_std.copy_from_slice(&flat[split..]);
    }
}

/// Independent categorical heads over one trunk; `head_sizes[h]` logits for
/// head `h`, concatenated in the trunk output.
#[derive(Debug, Clone)]
pub struct CategoricalPolicy {
    pub trunk: Mlp,
    pub head_sizes: Vec<usize>,
}

impl CategoricalPolicy {
    pub fn new<R: Rng>(
        obs_dim: usize,
        hidden_layers: usize,
        hidden_units: usize,
        head_sizes: Vec<usize>,
        rng: &mut R,
    ) -> Self {
        let logits: usize = head_sizes.iter().sum();
        let mut trunk = Mlp::with_hidden(obs_dim, hidden_layers, hidden_units, logits, rng);
        trunk.scale_last_layer(0.01);
        Self { trunk, head_sizes }
    }

    pub fn head_count(&self) -> usize {
        self.head_sizes.len()
    }

    /// Per-head softmax probabilities for a logit vector.
    pub fn head_probs(&self, logits: &[f64]) -> Vec<Vec<f64>> {
        let mut probs = Vec::with_capacity(self.head_sizes.len());
        let mut offset = 0;
        for &size in &self.head_sizes {
            let slice = &logits[offset..offset + size];
            offset += size;
            let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = slice.iter().map(|&l| (l - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            probs.push(exps.into_iter().map(|e| e / sum).collect());
        }
        probs
    }

    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> (Vec<usize>, f64) {
        let logits = self.trunk.forward(obs);
        let probs = self.head_probs(&logits);
        let mut choices = Vec::with_capacity(probs.len());
        let mut log_prob = 0.0;
        for head in &probs {
            let draw: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut picked = head.len() - 1;
            for (k, &p) in head.iter().enumerate() {
                acc += p;
                if draw < acc {
                    picked = k;
                    break;
                }
            }
            log_prob += head[picked].max(1e-300).ln();
            choices.push(picked);
        }
        (choices, log_prob)
    }

    pub fn greedy(&self, obs: &[f64]) -> Vec<usize> {
        let logits = self.trunk.forward(obs);
        self.head_probs(&logits)
            .iter()
            .map(|head| {
                head.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap()
            })
            .collect()
    }

    pub fn log_prob_of_choices(&self, logits: &[f64], choices: &[usize]) -> f64 {
        let probs = self.head_probs(logits);
        probs
            .iter()
            .zip(choices)
            .map(|(head, &c)| head[c].max(1e-300).ln())
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count()
    }
}
