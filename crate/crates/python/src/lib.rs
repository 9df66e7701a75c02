//! Python bindings: queue/reward primitives as module functions, the two
//! simulators as classes. Python drives the environments in-process.
//!
//! Usage from Python:
//!
//!     import driftq_py as dq
//!     dq.reward("ldptrlq", 2.0, 0.0, [3.0], [4.0], 1.0)   # -> -14.5
//!     sim = dq.MecSim(seed=7, users=3)
//!     obs = sim.reset()
//!     penalty, before, after, obs = sim.step([100.0]*3, 500.0, [0.01]*3)

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use driftq::env::Environment;
use driftq::mec::{MecAction, MecConfig, MecEnv};
use driftq::queue::{self, QueueFlow, QueueVector, RewardShaper, ShaperKind};
use driftq::routing::{min_cut_capacity, write_topology, RoutingConfig, RoutingEnv};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn queue_vec(values: Vec<f64>) -> PyResult<QueueVector> {
    QueueVector::new(values).map_err(value_err)
}

fn parse_shaper(kind: &str, v: f64, w: f64) -> PyResult<RewardShaper> {
    let kind = ShaperKind::parse(kind).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown shaper `{kind}`; expected ldptrlq | original_ldp | simplified_ldp | lerl"
        ))
    })?;
    RewardShaper::new(kind, v, w).map_err(value_err)
}

/// One slot of queue evolution: departures drain first (clamped at zero),
/// then arrivals land.
#[pyfunction]
fn step_queue(lengths: Vec<f64>, arrivals: Vec<f64>, departures: Vec<f64>) -> PyResult<Vec<f64>> {
    let q = queue_vec(lengths)?;
    let flow = QueueFlow::new(arrivals, departures).map_err(value_err)?;
    Ok(q.step(&flow).map_err(value_err)?.lengths().to_vec())
}

/// Half the sum of squared backlogs.
#[pyfunction]
fn lyapunov(lengths: Vec<f64>) -> PyResult<f64> {
    Ok(queue_vec(lengths)?.lyapunov())
}

/// Realized one-slot change of the potential.
#[pyfunction]
fn realized_drift(before: Vec<f64>, after: Vec<f64>) -> PyResult<f64> {
    queue::realized_drift(&queue_vec(before)?, &queue_vec(after)?).map_err(value_err)
}

/// Evaluate a reward shaper on one transition. `kind` is one of
/// "ldptrlq", "original_ldp", "simplified_ldp", "lerl".
#[pyfunction]
fn reward(
    kind: &str,
    v: f64,
    w: f64,
    before: Vec<f64>,
    after: Vec<f64>,
    penalty: f64,
) -> PyResult<f64> {
    parse_shaper(kind, v, w)?
        .reward(&queue_vec(before)?, &queue_vec(after)?, penalty)
        .map_err(value_err)
}

/// Arithmetic mean of a penalty series.
#[pyfunction]
fn time_avg_penalty(values: Vec<f64>) -> PyResult<f64> {
    queue::PenaltySeries::new(values)
        .time_average()
        .map_err(value_err)
}

/// Empirical mean-rate-stability surrogate over the final `window` slots.
#[pyfunction]
fn mean_rate_stability_score(backlog_totals: Vec<f64>, window: usize) -> PyResult<f64> {
    queue::mean_rate_stability_score(&backlog_totals, window).map_err(value_err)
}

/// Seeded mobile edge computing offloading simulator: `users` task queues
/// plus one base-station queue.
#[pyclass]
struct MecSim {
    env: MecEnv,
}

#[pymethods]
impl MecSim {
    #[new]
    #[pyo3(signature = (seed=0, users=10, arrival_rate=2.0, max_task_bits=100.0, v_weight=1.0))]
    fn new(
        seed: u64,
        users: usize,
        arrival_rate: f64,
        max_task_bits: f64,
        v_weight: f64,
    ) -> PyResult<Self> {
        let cfg = MecConfig {
            arrival_rate,
            max_task_bits,
            v_weight,
            ..MecConfig::with_users(users)
        };
        Ok(Self {
            env: MecEnv::new(cfg, seed).map_err(value_err)?,
        })
    }

    fn users(&self) -> usize {
        self.env.config().users
    }

    /// (local_cap, edge_cap, power_cap) action bounds.
    fn caps(&self) -> (f64, f64, f64) {
        let cfg = self.env.config();
        (cfg.local_cap, cfg.edge_cap, cfg.power_cap)
    }

    /// Restart the episode and return the raw observation
    /// [Q_1..Q_K, Q_BS, gain_1..gain_K].
    fn reset(&mut self) -> Vec<f64> {
        self.env.reset()
    }

    /// Advance one slot. Returns (penalty_joules, backlogs_before,
    /// backlogs_after, next_observation); backlog vectors list the user
    /// queues first and the base-station queue last.
    fn step(
        &mut self,
        local_rates: Vec<f64>,
        edge_rate: f64,
        tx_power: Vec<f64>,
    ) -> PyResult<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let action = MecAction {
            local_rates,
            edge_rate,
            tx_power,
        };
        let (tr, _) = self.env.step_action(&action).map_err(value_err)?;
        Ok((
            tr.penalty,
            tr.backlogs_before.lengths().to_vec(),
            tr.backlogs_after.lengths().to_vec(),
            tr.next_obs,
        ))
    }

    fn __repr__(&self) -> String {
        let state = self.env.state();
        format!(
            "MecSim(users={}, slot={}, total_backlog={:.1})",
            self.env.config().users,
            state.slot,
            state.backlogs().total()
        )
    }
}

/// Seeded store-and-forward routing simulator over a random connected
/// topology with a built-in max-weight baseline.
#[pyclass]
struct RoutingSim {
    env: RoutingEnv,
}

#[pymethods]
impl RoutingSim {
    #[new]
    #[pyo3(signature = (seed=0, nodes=20, nearest_neighbors=5, link_prob=0.5, mean_rate=1000.0, arrival_rate=100.0, max_task_bits=100.0, sources=3))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        seed: u64,
        nodes: usize,
        nearest_neighbors: usize,
        link_prob: f64,
        mean_rate: f64,
        arrival_rate: f64,
        max_task_bits: f64,
        sources: usize,
    ) -> PyResult<Self> {
        let cfg = RoutingConfig {
            nodes,
            nearest_neighbors,
            link_prob,
            mean_rate,
            arrival_rate,
            max_task_bits,
            sources,
            ..RoutingConfig::default()
        };
        Ok(Self {
            env: RoutingEnv::new(cfg, seed).map_err(value_err)?,
        })
    }

    fn sink(&self) -> usize {
        self.env.sink()
    }

    fn sources(&self) -> Vec<usize> {
        self.env.sources().to_vec()
    }

    fn queues(&self) -> Vec<f64> {
        self.env.state().queues.lengths().to_vec()
    }

    /// Choice count per action head (one head per non-sink node, choice 0
    /// is idle).
    fn action_choices(&self) -> Vec<usize> {
        match self.env.action_spec() {
            driftq::env::ActionSpec::MultiCategorical { choices } => choices,
            _ => unreachable!("routing actions are categorical"),
        }
    }

    /// Cumulative injected bits since construction.
    fn total_injected(&self) -> f64 {
        self.env.total_injected()
    }

    /// Max-flow capacity from the sources to the sink under the
    /// one-active-link-per-node service model, bits per slot.
    fn min_cut(&self) -> f64 {
        min_cut_capacity(
            self.env.graph(),
            self.env.sources(),
            self.env.sink(),
            self.env.config().slot_secs,
        )
    }

    /// The topology in its line-oriented text form.
    fn topology_text(&self) -> String {
        write_topology(self.env.graph())
    }

    fn reset(&mut self) -> Vec<f64> {
        self.env.reset()
    }

    /// Advance one slot under per-head choices (0 = idle, i = the i-th
    /// outgoing link of that node). Returns (energy, delivered_bits,
    /// backlogs_after).
    fn step(&mut self, choices: Vec<usize>) -> PyResult<(f64, f64, Vec<f64>)> {
        let pattern = self.env.choices_to_pattern(&choices).map_err(value_err)?;
        let (tr, outcome) = self.env.step_pattern(&pattern).map_err(value_err)?;
        Ok((
            outcome.energy,
            outcome.delivered,
            tr.backlogs_after.lengths().to_vec(),
        ))
    }

    /// Advance one slot under the max-weight baseline.
    fn step_backpressure(&mut self) -> PyResult<(f64, f64, Vec<f64>)> {
        let pattern = self.env.baseline_pattern();
        let (tr, outcome) = self.env.step_pattern(&pattern).map_err(value_err)?;
        Ok((
            outcome.energy,
            outcome.delivered,
            tr.backlogs_after.lengths().to_vec(),
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "RoutingSim(nodes={}, sink={}, sources={:?}, slot={})",
            self.env.config().nodes,
            self.env.sink(),
            self.env.sources(),
            self.env.state().slot
        )
    }
}

#[pymodule]
fn driftq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(step_queue, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(realized_drift, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(time_avg_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(mean_rate_stability_score, m)?)?;
    m.add_class::<MecSim>()?;
    m.add_class::<RoutingSim>()?;
    Ok(())
}
