//! Queue dynamics, the Lyapunov potential, and the reward shapers.
//!
//! Everything in this module is a pure function of its inputs: queue vectors
//! are immutable once constructed, stepping produces a new vector, and the
//! reward shapers evaluate closed-form expressions over a transition. The
//! simulators in [`crate::mec`] and [`crate::routing`] delegate all of their
//! reward computation here so the algebraic identities between shapers hold
//! identically in both environments.

use thiserror::Error;

/// Contract violations for queue operations.
#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("entry {index} is invalid: {value} (must be finite and >= 0)")]
    InvalidEntry { index: usize, value: f64 },
    #[error("penalty series is empty")]
    EmptySeries,
    #[error("window {window} must be smaller than the series length {len}")]
    WindowTooLarge { window: usize, len: usize },
}

fn validate_entries(values: &[f64]) -> Result<(), QueueError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(QueueError::InvalidEntry { index, value });
        }
    }
    Ok(())
}

/// Per-queue backlogs in bits. Entries are finite and nonnegative by
/// construction; the length is fixed for the lifetime of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueVector {
    lengths: Vec<f64>,
}

impl QueueVector {
    pub fn new(lengths: Vec<f64>) -> Result<Self, QueueError> {
        validate_entries(&lengths)?;
        Ok(Self { lengths })
    }

    pub fn zeros(count: usize) -> Self {
        Self {
            lengths: vec![0.0; count],
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total backlog across all queues.
    pub fn total(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Sum of squared backlogs.
    pub fn sum_squares(&self) -> f64 {
        self.lengths.iter().map(|q| q * q).sum()
    }

    /// Lyapunov potential: half the sum of squared backlogs.
    pub fn lyapunov(&self) -> f64 {
        0.5 * self.sum_squares()
    }

    /// One slot of queue evolution: departures drain first (clamped at zero),
    /// then arrivals land. Arrivals are therefore never servable in the slot
    /// they arrive.
    pub fn step(&self, flow: &QueueFlow) -> Result<QueueVector, QueueError> {
        if flow.len() != self.len() {
            return Err(QueueError::DimensionMismatch {
                expected: self.len(),
                actual: flow.len(),
            });
        }
        let lengths = self
            .lengths
            .iter()
            .zip(flow.departures.iter().zip(flow.arrivals.iter()))
            .map(|(&q, (&dep, &arr))| (q - dep).max(0.0) + arr)
            .collect();
        Ok(QueueVector { lengths })
    }
}

/// One slot of arrivals and departures, in bits, aligned with a
/// [`QueueVector`] of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueFlow {
    arrivals: Vec<f64>,
    departures: Vec<f64>,
}

impl QueueFlow {
    pub fn new(arrivals: Vec<f64>, departures: Vec<f64>) -> Result<Self, QueueError> {
        if arrivals.len() != departures.len() {
            return Err(QueueError::DimensionMismatch {
                expected: arrivals.len(),
                actual: departures.len(),
            });
        }
        validate_entries(&arrivals)?;
        validate_entries(&departures)?;
        Ok(Self {
            arrivals,
            departures,
        })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn departures(&self) -> &[f64] {
        &self.departures
    }
}

/// Realized one-slot change of the Lyapunov potential (sample path, not
/// expectation).
pub fn realized_drift(before: &QueueVector, after: &QueueVector) -> Result<f64, QueueError> {
    if before.len() != after.len() {
        return Err(QueueError::DimensionMismatch {
            expected: before.len(),
            actual: after.len(),
        });
    }
    Ok(after.lyapunov() - before.lyapunov())
}

/// Which reward formula a [`RewardShaper`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShaperKind {
    /// RL-tailored drift-plus-penalty: `-1/2 sum(Q'^2 + Q^2) - V p`.
    /// Symmetric in (before, after); differs from [`ShaperKind::OriginalLdp`]
    /// by the state-only term `-sum Q^2`.
    Ldptrlq,
    /// Negative realized drift-plus-penalty: `-1/2 sum(Q'^2 - Q^2) - V p`.
    OriginalLdp,
    /// Linearized drift: `-sum Q (Q' - Q) - V p`.
    SimplifiedLdp,
    /// Latency/energy trade-off, unrelated to the drift framework:
    /// `-w sum(Q') - p`.
    Lerl,
}

impl ShaperKind {
    pub fn name(self) -> &'static str {
        match self {
            ShaperKind::Ldptrlq => "ldptrlq",
            ShaperKind::OriginalLdp => "original_ldp",
            ShaperKind::SimplifiedLdp => "simplified_ldp",
            ShaperKind::Lerl => "lerl",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "ldptrlq" => Some(ShaperKind::Ldptrlq),
            "original_ldp" => Some(ShaperKind::OriginalLdp),
            "simplified_ldp" => Some(ShaperKind::SimplifiedLdp),
            "lerl" => Some(ShaperKind::Lerl),
            _ => None,
        }
    }
}

/// A fully specified reward formula: the variant plus the drift/penalty
/// trade-off weight `V` and the latency weight `w` (used only by LERL).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardShaper {
    pub kind: ShaperKind,
    pub v: f64,
    pub w: f64,
}

impl RewardShaper {
    pub fn new(kind: ShaperKind, v: f64, w: f64) -> Result<Self, QueueError> {
        if !v.is_finite() || v < 0.0 {
            return Err(QueueError::InvalidEntry { index: 0, value: v });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(QueueError::InvalidEntry { index: 1, value: w });
        }
        Ok(Self { kind, v, w })
    }

    pub fn ldptrlq(v: f64) -> Self {
        Self::new(ShaperKind::Ldptrlq, v, 0.0).expect("nonnegative weight")
    }

    pub fn original_ldp(v: f64) -> Self {
        Self::new(ShaperKind::OriginalLdp, v, 0.0).expect("nonnegative weight")
    }

    pub fn simplified_ldp(v: f64) -> Self {
        Self::new(ShaperKind::SimplifiedLdp, v, 0.0).expect("nonnegative weight")
    }

    pub fn lerl(w: f64) -> Self {
        Self::new(ShaperKind::Lerl, 0.0, w).expect("nonnegative weight")
    }

    /// Evaluate the reward for one transition `(before, after, penalty)`.
    pub fn reward(
        &self,
        before: &QueueVector,
        after: &QueueVector,
        penalty: f64,
    ) -> Result<f64, QueueError> {
        if before.len() != after.len() {
            return Err(QueueError::DimensionMismatch {
                expected: before.len(),
                actual: after.len(),
            });
        }
        let value = match self.kind {
            ShaperKind::Ldptrlq => {
                -0.5 * (after.sum_squares() + before.sum_squares()) - self.v * penalty
            }
            ShaperKind::OriginalLdp => {
                -0.5 * (after.sum_squares() - before.sum_squares()) - self.v * penalty
            }
            ShaperKind::SimplifiedLdp => {
                let linearized: f64 = before
                    .lengths()
                    .iter()
                    .zip(after.lengths())
                    .map(|(&q0, &q1)| q0 * (q1 - q0))
                    .sum();
                -linearized - self.v * penalty
            }
            ShaperKind::Lerl => -self.w * after.total() - penalty,
        };
        Ok(value)
    }
}

/// Time-ordered per-slot penalties (environment-specific units, e.g. Joules).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PenaltySeries {
    values: Vec<f64>,
}

impl PenaltySeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Finite-horizon empirical time average.
    pub fn time_average(&self) -> Result<f64, QueueError> {
        if self.values.is_empty() {
            return Err(QueueError::EmptySeries);
        }
        Ok(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

/// Empirical mean-rate-stability surrogate.
///
/// `backlog_totals[i]` is the total backlog at the end of slot `i + 1`; the
/// score is the mean of `total / t` over the final `window` slots. Stable
/// systems drive the score toward zero as the horizon grows; a queue growing
/// linearly keeps it bounded away from zero.
pub fn mean_rate_stability_score(backlog_totals: &[f64], window: usize) -> Result<f64, QueueError> {
    if window == 0 || window >= backlog_totals.len() {
        return Err(QueueError::WindowTooLarge {
            window,
            len: backlog_totals.len(),
        });
    }
    let start = backlog_totals.len() - window;
    let sum: f64 = backlog_totals[start..]
        .iter()
        .enumerate()
        .map(|(offset, &total)| total / (start + offset + 1) as f64)
        .sum();
    Ok(sum / window as f64)
}
