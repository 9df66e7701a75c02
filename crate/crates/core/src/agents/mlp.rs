//! A small fully connected network with hand-written backpropagation, plus
//! the adaptive-moment optimizer that trains it. Hidden layers use
//! rectified-linear activations; the output layer is linear.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// One dense layer, weights row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }
}

/// Feed-forward network: `dims = [input, hidden.., output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    pub layers: Vec<Dense>,
}

/// Per-layer gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

/// Post-activation values of every layer for one forward pass; `acts[0]` is
/// the input, `acts[i]` the output of layer `i` (rectified for hidden
/// layers, linear for the last).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Scaled-normal initialization: hidden weights use sqrt(2 / fan_in)
    /// suited to rectified units, the output layer sqrt(1 / fan_in).
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let last = i == dims.len() - 2;
                let scale = if last {
                    (1.0 / in_dim as f64).sqrt()
                } else {
                    (2.0 / in_dim as f64).sqrt()
                };
                let mut layer = Dense::zeros(in_dim, out_dim);
                for w in &mut layer.w {
                    let z: f64 = StandardNormal.sample(rng);
                    *w = scale * z;
                }
                layer
            })
            .collect();
        Self {
            dims: dims.to_vec(),
            layers,
        }
    }

    /// Standard policy/value shape: `hidden_layers` hidden layers of
    /// `hidden_units` each between the given input and output widths.
    pub fn with_hidden<R: Rng>(
        input: usize,
        hidden_layers: usize,
        hidden_units: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden_layers + 2);
        dims.push(input);
        dims.extend(std::iter::repeat(hidden_units).take(hidden_layers));
        dims.push(output);
        Self::new(&dims, rng)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Shrink the output layer, used to start policies near-deterministic.
    pub fn scale_last_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().unwrap();
        for w in &mut last.w {
            *w *= factor;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut act = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = layer.b.clone();
            for (o, row) in next.iter_mut().enumerate() {
                let weights = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                *row += weights.iter().zip(&act).map(|(&w, &a)| w * a).sum::<f64>();
            }
            if i + 1 < self.layers.len() {
                for v in &mut next {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            act = next;
        }
        act
    }

    /// Forward pass that keeps every layer's activations for backprop.
    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().unwrap();
            let mut next = layer.b.clone();
            for (o, row) in next.iter_mut().enumerate() {
                let weights = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                *row += weights.iter().zip(prev).map(|(&w, &a)| w * a).sum::<f64>();
            }
            if i + 1 < self.layers.len() {
                for v in &mut next {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(next);
        }
        ForwardCache { acts }
    }

    /// Accumulate gradients for one sample given the loss gradient at the
    /// output. Rectifier masks come from the cached post-activations (zero
    /// activation means the unit was off).
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut MlpGrads) {
        let mut delta = output_grad.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let grad = &mut grads.layers[l];
            let prev = &cache.acts[l];
            for o in 0..layer.out_dim {
                grad.b[o] += delta[o];
                let row = &mut grad.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (slot, &a) in row.iter_mut().zip(prev) {
                    *slot += delta[o] * a;
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (pd, &w) in prev_delta.iter_mut().zip(row) {
                        *pd += w * delta[o];
                    }
                }
                for (pd, &a) in prev_delta.iter_mut().zip(&cache.acts[l]) {
                    if a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut offset = 0;
        for layer in &mut self.layers {
            let w_len = layer.w.len();
            layer.w.copy_from_slice(&flat[offset..offset + w_len]);
            offset += w_len;
            let b_len = layer.b.len();
            layer.b.copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
    }
}

impl MlpGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.w {
                *w *= factor;
            }
            for b in &mut layer.b {
                *b *= factor;
            }
        }
    }
}

/// Adaptive-moment gradient descent over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, len: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_maps_everything_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[3, 4, 2], &mut rng);
        let zeros = vec![0.0; net.param_count()];
        net.unflatten(&zeros);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn single_layer_reproduces_a_hand_set_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[2, 2], &mut rng);
        // y = [[1, 2], [3, 4]] x + [0.5, -0.5]
        net.unflatten(&[1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        let y = net.forward(&[1.0, 1.0]);
        assert_eq!(y, vec![3.5, 6.5]);
    }

    /// Independent naive reimplementation of the forward pass used as an
    /// oracle against the production path.
    fn naive_forward(net: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut act = input.to_vec();
        for (i, layer) in net.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut sum = layer.b[o];
                for (j, &a) in act.iter().enumerate() {
                    sum += layer.w[o * layer.in_dim + j] * a;
                }
                *slot = sum;
            }
            if i + 1 < net.layers.len() {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            act = next;
        }
        act
    }

    #[test]
    fn forward_matches_naive_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let net = Mlp::new(&[5, 8, 8, 3], &mut rng);
            let input: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fast = net.forward(&input);
            let slow = naive_forward(&net, &input);
            for (a, b) in fast.iter().zip(&slow) {
                let denom = b.abs().max(1e-9);
                assert!((a - b).abs() / denom < 1e-6);
            }
        }
    }

    #[test]
    fn cached_forward_agrees_with_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Mlp::new(&[4, 6, 2], &mut rng);
        let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = net.forward_cached(&input);
        assert_eq!(cache.acts.last().unwrap(), &net.forward(&input));
    }

    #[test]
    fn backward_matches_finite_differences_on_a_scalar_loss() {
        // Loss = sum(outputs); check a few random parameters.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[3, 5, 2], &mut rng);
        let input: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

        let cache = net.forward_cached(&input);
        let mut grads = net.zero_grads();
        net.backward(&cache, &[1.0, 1.0], &mut grads);
        let analytic = grads.flatten();

        let flat = net.flatten();
        let h = 1e-6;
        for idx in [0, 3, 7, flat.len() - 1, flat.len() / 2] {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut fp = flat.clone();
            fp[idx] += h;
            plus.unflatten(&fp);
            let mut fm = flat.clone();
            fm[idx] -= h;
            minus.unflatten(&fm);
            let lp: f64 = plus.forward(&input).iter().sum();
            let lm: f64 = minus.forward(&input).iter().sum();
            let numeric = (lp - lm) / (2.0 * h);
            assert!(
                (numeric - analytic[idx]).abs() < 1e-5 * numeric.abs().max(1.0),
                "param {idx}: numeric {numeric} vs analytic {}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn flatten_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[3, 4, 2], &mut rng);
        let mut copy = Mlp::new(&[3, 4, 2], &mut rng);
        copy.unflatten(&net.flatten());
        assert_eq!(
            copy.forward(&[0.1, 0.2, 0.3]),
            net.forward(&[0.1, 0.2, 0.3])
        );
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![5.0, -3.0];
        let mut opt = Adam::new(0.1, 2);
        for _ in 0..500 {
            let grads: Vec<f64> = params.iter().map(|&p| 2.0 * p).collect();
            opt.step(&mut params, &grads);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-2));
    }
}
