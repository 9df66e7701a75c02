//! Latency/energy weight calibration.
//!
//! The latency/energy shaper's trade-off coefficient is not comparable to
//! the Lyapunov weight, so a coarse logarithmic grid is traversed and the
//! weight whose (energy, queue) metrics land closest to a reference run is
//! declared "weight 1". Evaluation of a candidate weight is injected by the
//! caller: the command-line path trains a real run, tests use synthetic
//! metric models.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("calibration grid is empty")]
    EmptyGrid,
    #[error("no candidate weight produced a stable run")]
    AllUnstable,
}

/// Metrics of one candidate weight.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationPoint {
    pub mean_energy: f64,
    pub mean_queue: f64,
    pub stable: bool,
}

/// 10 points per decade over 4 decades, centered on 1.
pub fn default_weight_grid() -> Vec<f64> {
    (0..=40)
        .map(|k| 10f64.powf(-2.0 + k as f64 / 10.0))
        .collect()
}

/// Normalized Euclidean distance of (energy, queue) to the reference pair.
fn distance(point: &CalibrationPoint, reference: (f64, f64)) -> f64 {
    let (ref_energy, ref_queue) = reference;
    let de = (point.mean_energy - ref_energy) / ref_energy.abs().max(1e-12);
    let dq = (point.mean_queue - ref_queue) / ref_queue.abs().max(1e-12);
    (de * de + dq * dq).sqrt()
}

/// Traverse the grid and return the stable weight closest to the reference
/// metrics. Ties break toward the smaller weight.
pub fn calibrate_lerl_weight(
    grid: &[f64],
    reference: (f64, f64),
    mut evaluate: impl FnMut(f64) -> CalibrationPoint,
) -> Result<f64, CalibrationError> {
    if grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    let mut best: Option<(f64, f64)> = None; // (distance, weight)
    for &weight in grid {
        let point = evaluate(weight);
        if !point.stable {
            continue;
        }
        let d = distance(&point, reference);
        let better = match best {
            None => true,
            Some((bd, _)) => d < bd,
        };
        if better {
            best = Some((d, weight));
        }
    }
    best.map(|(_, w)| w).ok_or(CalibrationError::AllUnstable)
}
