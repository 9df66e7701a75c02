//! Metric rows, learning-curve files, and the wide comparison table.
//!
//! All CSV output goes through [`format_sig`] with 9 significant digits so
//! repeated runs emit byte-identical files.

use thiserror::Error;

use crate::agents::EpisodeRecord;
use crate::numfmt::format_sig;

/// One evaluated run: metrics of the final greedy policy plus curve-derived
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub sweep_value: f64,
    pub seed: u64,
    /// Joules per slot over the evaluation window.
    pub mean_energy: f64,
    /// Bits, mean total backlog per slot.
    pub mean_queue: f64,
    /// Bits, standard deviation over all (slot, queue) samples.
    pub queue_std: f64,
    /// Slots; routing only.
    pub latency: Option<f64>,
    pub stability_score: f64,
    pub episodes_to_convergence: Option<usize>,
    pub failed: bool,
}

fn opt_cell(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format_sig(v, 9))
}

pub const METRICS_HEADER: &str = "sweep_value,seed,mean_energy,mean_queue,queue_std,latency,stability_score,episodes_to_convergence,status";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            format_sig(row.sweep_value, 9),
            row.seed,
            format_sig(row.mean_energy, 9),
            format_sig(row.mean_queue, 9),
            format_sig(row.queue_std, 9),
            opt_cell(row.latency),
            format_sig(row.stability_score, 9),
            row.episodes_to_convergence
                .map_or(String::new(), |e| e.to_string()),
            if row.failed { "failed" } else { "ok" },
        ));
    }
    out
}

/// Per-episode learning curve file body.
pub fn curve_csv(curve: &[EpisodeRecord]) -> String {
    let mut out = String::from("episode,mean_reward,mean_total_backlog,mean_penalty,backlog_std\n");
    for rec in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.episode,
            format_sig(rec.mean_reward, 9),
            format_sig(rec.mean_total_backlog, 9),
            format_sig(rec.mean_penalty, 9),
            format_sig(rec.backlog_std, 9),
        ));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Option<Vec<EpisodeRecord>> {
    let mut lines = text.lines();
    lines.next()?; // header
    let mut curve = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return None;
        }
        curve.push(EpisodeRecord {
            episode: fields[0].parse().ok()?,
            mean_reward: fields[1].parse().ok()?,
            mean_total_backlog: fields[2].parse().ok()?,
            mean_penalty: fields[3].parse().ok()?,
            backlog_std: fields[4].parse().ok()?,
        });
    }
    Some(curve)
}

/// Episode-granularity mean-rate-stability surrogate: the mean over the
/// final `window` episodes of (episode mean backlog) / (slots elapsed by
/// that episode's end). Derivable from a stored curve file alone.
pub fn stability_from_curve(mean_backlogs: &[f64], steps_per_episode: usize, window: usize) -> f64 {
    if mean_backlogs.is_empty() {
        return f64::NAN;
    }
    let window = window.clamp(1, mean_backlogs.len());
    let start = mean_backlogs.len() - window;
    let sum: f64 = mean_backlogs[start..]
        .iter()
        .enumerate()
        .map(|(offset, &backlog)| {
            let slots = ((start + offset + 1) * steps_per_episode) as f64;
            backlog / slots
        })
        .sum();
    sum / window as f64
}

/// First episode whose 20-episode moving average of reward is within 5% of
/// the final-100-episode mean. `None` when the curve never settles.
pub fn episodes_to_convergence(rewards: &[f64]) -> Option<usize> {
    const MOVING: usize = 20;
    const FINAL: usize = 100;
    const TOLERANCE: f64 = 0.05;
    if rewards.len() < MOVING {
        return None;
    }
    let tail = &rewards[rewards.len().saturating_sub(FINAL)..];
    let target = tail.iter().sum::<f64>() / tail.len() as f64;
    let denom = target.abs().max(1e-9);
    for end in MOVING..=rewards.len() {
        let window = &rewards[end - MOVING..end];
        let avg = window.iter().sum::<f64>() / MOVING as f64;
        if (avg - target).abs() <= TOLERANCE * denom {
            return Some(end - 1);
        }
    }
    None
}

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("no algorithms given")]
    Empty,
    #[error("algorithm `{0}` covers a different sweep axis")]
    MismatchedAxes(String),
}

/// Rows for one algorithm, labelled for the comparison table.
#[derive(Debug, Clone)]
pub struct AlgorithmRows {
    pub name: String,
    pub rows: Vec<MetricsRow>,
}

struct Aggregate {
    mean_energy: f64,
    mean_queue: f64,
    queue_std: f64,
    latency: Option<f64>,
}

fn aggregate(rows: &[&MetricsRow]) -> Aggregate {
    let n = rows.len() as f64;
    let latencies: Vec<f64> = rows.iter().filter_map(|r| r.latency).collect();
    Aggregate {
        mean_energy: rows.iter().map(|r| r.mean_energy).sum::<f64>() / n,
        mean_queue: rows.iter().map(|r| r.mean_queue).sum::<f64>() / n,
        queue_std: rows.iter().map(|r| r.queue_std).sum::<f64>() / n,
        latency: if latencies.is_empty() {
            None
        } else {
            Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
        },
    }
}

fn flag(reference: f64, other: f64) -> &'static str {
    let tol = 1e-12 * reference.abs().max(other.abs()).max(1.0);
    if (reference - other).abs() <= tol {
        "tie"
    } else if reference < other {
        "win"
    } else {
        "loss"
    }
}

/// Wide-format comparison: one row per sweep value, one column group per
/// algorithm per metric. The first algorithm is the reference; win/loss
/// flags state whether it beats each competitor on each metric (lower is
/// better throughout).
pub fn sweep_summary(algorithms: &[AlgorithmRows]) -> Result<String, SummaryError> {
    let Some(first) = algorithms.first() else {
        return Err(SummaryError::Empty);
    };
    let axis: Vec<f64> = {
        let mut values: Vec<f64> = first.rows.iter().map(|r| r.sweep_value).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        values
    };
    for algo in algorithms {
        let mut values: Vec<f64> = algo.rows.iter().map(|r| r.sweep_value).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        if values != axis {
            return Err(SummaryError::MismatchedAxes(algo.name.clone()));
        }
    }

    let mut header = String::from("sweep_value");
    for algo in algorithms {
        for metric in ["mean_energy", "mean_queue", "queue_std", "latency"] {
            header.push_str(&format!(",{}_{metric}", algo.name));
        }
    }
    if algorithms.len() > 1 {
        for algo in &algorithms[1..] {
            for metric in ["energy", "queue", "queue_std", "latency"] {
                header.push_str(&format!(",vs_{}_{metric}", algo.name));
            }
        }
    }
    let mut out = header;
    out.push('\n');

    for &value in &axis {
        let mut cells = vec![format_sig(value, 9)];
        let mut aggregates = Vec::new();
        for algo in algorithms {
            let rows: Vec<&MetricsRow> = algo
                .rows
                .iter()
                .filter(|r| r.sweep_value == value && !r.failed)
                .collect();
            let agg = aggregate(&rows);
            cells.push(format_sig(agg.mean_energy, 9));
            cells.push(format_sig(agg.mean_queue, 9));
            cells.push(format_sig(agg.queue_std, 9));
            cells.push(opt_cell(agg.latency));
            aggregates.push(agg);
        }
        if aggregates.len() > 1 {
            let reference = &aggregates[0];
            for other in &aggregates[1..] {
                cells.push(flag(reference.mean_energy, other.mean_energy).to_string());
                cells.push(flag(reference.mean_queue, other.mean_queue).to_string());
                cells.push(flag(reference.queue_std, other.queue_std).to_string());
                cells.push(match (reference.latency, other.latency) {
                    (Some(a), Some(b)) => flag(a, b).to_string(),
                    _ => String::new(),
                });
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}
