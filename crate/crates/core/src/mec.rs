//! Mobile edge computing offloading environment.
//!
//! `K` user task queues plus one base-station queue evolve in discrete slots.
//! Tasks arrive as a compound Poisson process (Poisson count, uniform size),
//! depart through local computing and wireless offloading over orthogonal
//! channels, and the per-slot penalty is the energy spent on transmission and
//! computation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use thiserror::Error;

use crate::env::{ActionSpec, AgentAction, EnvError, Environment, Transition};
use crate::queue::{QueueFlow, QueueVector};

#[derive(Debug, Error)]
pub enum MecConfigError {
    #[error("{field} must be strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("v_weight must be nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error("local_energy_per_bit has {actual} entries, expected {expected}")]
    EnergyLength { expected: usize, actual: usize },
}

/// Full parameterization of the offloading system.
///
/// Defaults hold the reference simulation settings: 10 users, 10 kHz channel
/// bandwidth, noise power 3.16e-11 W, local/edge compute caps of 1000 and
/// 5000 bits/s, and arrival rate 2 tasks per slot. Quantities the reference
/// setting leaves open get artifact defaults: 1 W transmit cap, 100-bit
/// maximum task size, 1 s slots, and local/edge compute energy of 1e-3 and
/// 1e-4 J/bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MecConfig {
    /// Number of mobile users K.
    pub users: usize,
    /// Task arrival rate per user, tasks per slot.
    pub arrival_rate: f64,
    /// Task sizes are uniform on (0, max_task_bits).
    pub max_task_bits: f64,
    /// Per-user channel bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Channel noise power, W.
    pub noise_power: f64,
    /// Per-user local computing cap, bits/s.
    pub local_cap: f64,
    /// Edge server computing cap, bits/s.
    pub edge_cap: f64,
    /// Per-user transmit power cap, W.
    pub power_cap: f64,
    /// Local computing energy per bit, J/bit, one entry per user.
    pub local_energy_per_bit: Vec<f64>,
    /// Edge computing energy per bit, J/bit.
    pub edge_energy_per_bit: f64,
    /// Slot length, seconds.
    pub slot_secs: f64,
    /// Drift/penalty trade-off weight carried with the environment config.
    pub v_weight: f64,
}

impl Default for MecConfig {
    fn default() -> Self {
        Self {
            users: 10,
            arrival_rate: 2.0,
            max_task_bits: 100.0,
            bandwidth_hz: 1.0e4,
            noise_power: 3.16e-11,
            local_cap: 1000.0,
            edge_cap: 5000.0,
            power_cap: 1.0,
            local_energy_per_bit: vec![1.0e-3; 10],
            edge_energy_per_bit: 1.0e-4,
            slot_secs: 1.0,
            v_weight: 1.0,
        }
    }
}

impl MecConfig {
    /// Default configuration resized to `users` queues.
    pub fn with_users(users: usize) -> Self {
        Self {
            users,
            local_energy_per_bit: vec![1.0e-3; users],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MecConfigError> {
        let positives = [
            ("users", self.users as f64),
            ("arrival_rate", self.arrival_rate),
            ("max_task_bits", self.max_task_bits),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power),
            ("local_cap", self.local_cap),
            ("edge_cap", self.edge_cap),
            ("power_cap", self.power_cap),
            ("edge_energy_per_bit", self.edge_energy_per_bit),
            ("slot_secs", self.slot_secs),
        ];
        for (field, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(MecConfigError::NotPositive { field, value });
            }
        }
        if !(self.v_weight >= 0.0) || !self.v_weight.is_finite() {
            return Err(MecConfigError::NegativeWeight(self.v_weight));
        }
        if self.local_energy_per_bit.len() != self.users {
            return Err(MecConfigError::EnergyLength {
                expected: self.users,
                actual: self.local_energy_per_bit.len(),
            });
        }
        for &eta in &self.local_energy_per_bit {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(MecConfigError::NotPositive {
                    field: "local_energy_per_bit",
                    value: eta,
                });
            }
        }
        Ok(())
    }
}

/// Snapshot of the system state at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MecState {
    pub user_queues: QueueVector,
    pub bs_queue: f64,
    pub channel_gains: Vec<f64>,
    pub slot: u64,
}

impl MecState {
    /// Backlogs over all K+1 queues, base station last.
    pub fn backlogs(&self) -> QueueVector {
        let mut lengths = self.user_queues.lengths().to_vec();
        lengths.push(self.bs_queue);
        QueueVector::new(lengths).expect("queues stay nonnegative")
    }

    /// Raw observation: `[Q_1..Q_K, Q_BS, gain_1..gain_K]`.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = self.user_queues.lengths().to_vec();
        obs.push(self.bs_queue);
        obs.extend_from_slice(&self.channel_gains);
        obs
    }
}

/// Per-slot control decision: local compute rates, the edge compute rate,
/// and per-user transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct MecAction {
    /// Local computing speed per user, bits/s, within [0, local_cap].
    pub local_rates: Vec<f64>,
    /// Edge computing speed, bits/s, within [0, edge_cap].
    pub edge_rate: f64,
    /// Transmit power per user, W, within [0, power_cap].
    pub tx_power: Vec<f64>,
}

impl MecAction {
    pub fn zeros(users: usize) -> Self {
        Self {
            local_rates: vec![0.0; users],
            edge_rate: 0.0,
            tx_power: vec![0.0; users],
        }
    }

    /// Flat layout used by the agents: `[local_1..local_K, edge, p_1..p_K]`.
    pub fn from_flat(flat: &[f64], users: usize) -> Result<Self, EnvError> {
        if flat.len() != 2 * users + 1 {
            return Err(EnvError::ActionShape {
                expected: 2 * users + 1,
                actual: flat.len(),
            });
        }
        Ok(Self {
            local_rates: flat[..users].to_vec(),
            edge_rate: flat[users],
            tx_power: flat[users + 1..].to_vec(),
        })
    }

    fn check_bounds(&self, cfg: &MecConfig) -> Result<(), EnvError> {
        let bound = |index: usize, value: f64, high: f64| -> Result<(), EnvError> {
            if !(0.0..=high).contains(&value) || !value.is_finite() {
                Err(EnvError::ActionBound {
                    index,
                    value,
                    low: 0.0,
                    high,
                })
            } else {
                Ok(())
            }
        };
        for (k, &rate) in self.local_rates.iter().enumerate() {
            bound(k, rate, cfg.local_cap)?;
        }
        bound(cfg.users, self.edge_rate, cfg.edge_cap)?;
        for (k, &power) in self.tx_power.iter().enumerate() {
            bound(cfg.users + 1 + k, power, cfg.power_cap)?;
        }
        Ok(())
    }
}

/// Shannon-rate offloading throughput in bits/s.
pub fn offload_rate(bandwidth_hz: f64, gain: f64, power: f64, noise_power: f64) -> f64 {
    bandwidth_hz * (1.0 + gain * power / noise_power).log2()
}

/// Energy spent in one slot: transmission plus local and edge computation.
pub fn energy(action: &MecAction, cfg: &MecConfig) -> f64 {
    let dt = cfg.slot_secs;
    let tx: f64 = action.tx_power.iter().sum::<f64>() * dt;
    let local: f64 = action
        .local_rates
        .iter()
        .zip(&cfg.local_energy_per_bit)
        .map(|(&rate, &eta)| eta * rate * dt)
        .sum();
    let edge = cfg.edge_energy_per_bit * action.edge_rate * dt;
    tx + local + edge
}

/// Total arriving bits for each of `count` queues: a Poisson number of tasks
/// per queue, each task uniform on (0, max_task_bits).
pub fn sample_arrivals<R: Rng>(
    rng: &mut R,
    arrival_rate: f64,
    max_task_bits: f64,
    count: usize,
) -> Vec<f64> {
    let poisson = Poisson::new(arrival_rate).expect("positive rate");
    (0..count)
        .map(|_| {
            let tasks = poisson.sample(rng) as u64;
            (0..tasks)
                .map(|_| rng.random_range(0.0..max_task_bits))
                .sum()
        })
        .collect()
}

/// Outcome of one slot, including where the departed bits went.
#[derive(Debug, Clone)]
pub struct MecSlotOutcome {
    /// Bits served locally per user.
    pub served_locally: Vec<f64>,
    /// Bits actually moved to the base station per user.
    pub offloaded: Vec<f64>,
    /// Fresh arrivals per user.
    pub arrivals: Vec<f64>,
    /// Energy spent this slot, Joules.
    pub energy: f64,
}

/// The environment instance: config, seeded RNG, and the evolving state.
#[derive(Debug, Clone)]
pub struct MecEnv {
    cfg: MecConfig,
    state: MecState,
    rng: ChaCha8Rng,
}

impl MecEnv {
    /// Build the environment with zeroed queues and freshly sampled channel
    /// gains. Identical `(cfg, seed)` yields a bit-identical instance.
    pub fn new(cfg: MecConfig, seed: u64) -> Result<Self, MecConfigError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = sample_gains(&mut rng, cfg.users);
        let state = MecState {
            user_queues: QueueVector::zeros(cfg.users),
            bs_queue: 0.0,
            channel_gains: gains,
            slot: 0,
        };
        Ok(Self { cfg, state, rng })
    }

    pub fn config(&self) -> &MecConfig {
        &self.cfg
    }

    pub fn state(&self) -> &MecState {
        &self.state
    }

    /// Advance one slot. Departures are split local-first: local computing
    /// drains up to its rate, then offloading takes from the remainder, so
    /// the base station only ever receives bits that actually left a user
    /// queue. Arrivals land after departures.
    pub fn step_action(
        &mut self,
        action: &MecAction,
    ) -> Result<(Transition, MecSlotOutcome), EnvError> {
        action.check_bounds(&self.cfg)?;
        let cfg = &self.cfg;
        let dt = cfg.slot_secs;
        let before = self.state.backlogs();
        let obs = self.state.observation();

        let mut served_locally = Vec::with_capacity(cfg.users);
        let mut offloaded = Vec::with_capacity(cfg.users);
        for k in 0..cfg.users {
            let backlog = self.state.user_queues.lengths()[k];
            let rate = offload_rate(
                cfg.bandwidth_hz,
                self.state.channel_gains[k],
                action.tx_power[k],
                cfg.noise_power,
            );
            let local = (action.local_rates[k] * dt).min(backlog);
            let remainder = backlog - local;
            let moved = (rate * dt).min(remainder);
            served_locally.push(local);
            offloaded.push(moved);
        }

        let arrivals = sample_arrivals(
            &mut self.rng,
            cfg.arrival_rate,
            cfg.max_task_bits,
            cfg.users,
        );
        let departures: Vec<f64> = served_locally
            .iter()
            .zip(&offloaded)
            .map(|(&local, &moved)| local + moved)
            .collect();
        let flow = QueueFlow::new(arrivals.clone(), departures).expect("validated flows");
        let user_queues = self
            .state
            .user_queues
            .step(&flow)
            .expect("dimensions agree");

        let bs_arrival: f64 = offloaded.iter().sum();
        let bs_queue = (self.state.bs_queue - action.edge_rate * dt).max(0.0) + bs_arrival;

        let penalty = energy(action, cfg);
        let gains = sample_gains(&mut self.rng, cfg.users);
        self.state = MecState {
            user_queues,
            bs_queue,
            channel_gains: gains,
            slot: self.state.slot + 1,
        };

        let transition = Transition {
            obs,
            action: action
                .local_rates
                .iter()
                .chain(std::iter::once(&action.edge_rate))
                .chain(action.tx_power.iter())
                .copied()
                .collect(),
            next_obs: self.state.observation(),
            penalty,
            backlogs_before: before,
            backlogs_after: self.state.backlogs(),
        };
        let outcome = MecSlotOutcome {
            served_locally,
            offloaded,
            arrivals,
            energy: penalty,
        };
        Ok((transition, outcome))
    }
}

/// Rayleigh-fading channel power gains: i.i.d. exponential per user per
/// slot. The mean gain is calibrated against the default noise power so
/// that the received SNR at the 1 W power cap spans roughly 0..15 dB,
/// putting the offload rate in the same range as the compute caps instead
/// of making transmission free.
pub const MEAN_CHANNEL_GAIN: f64 = 1.0e-11;

fn sample_gains<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    let exp = Exp::new(1.0 / MEAN_CHANNEL_GAIN).expect("positive rate");
    (0..count).map(|_| exp.sample(rng)).collect()
}

impl Environment for MecEnv {
    fn obs_dim(&self) -> usize {
        2 * self.cfg.users + 1
    }

    fn action_spec(&self) -> ActionSpec {
        let users = self.cfg.users;
        let mut high = vec![self.cfg.local_cap; users];
        high.push(self.cfg.edge_cap);
        high.extend(std::iter::repeat(self.cfg.power_cap).take(users));
        ActionSpec::Box {
            low: vec![0.0; 2 * users + 1],
            high,
        }
    }

    fn queue_count(&self) -> usize {
        self.cfg.users + 1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = MecState {
            user_queues: QueueVector::zeros(self.cfg.users),
            bs_queue: 0.0,
            channel_gains: sample_gains(&mut self.rng, self.cfg.users),
            slot: 0,
        };
        self.state.observation()
    }

    fn step(&mut self, action: &AgentAction) -> Result<Transition, EnvError> {
        let flat = action.as_continuous()?;
        let action = MecAction::from_flat(flat, self.cfg.users)?;
        self.step_action(&action).map(|(transition, _)| transition)
    }
}
