//! Experiment orchestration: seeded multi-run sweeps, greedy evaluation of
//! the trained policy, metric aggregation, and deterministic CSV emission.
//!
//! Runs within a sweep are independent; a small worker pool executes them
//! concurrently. Every output file is written to a temporary name and
//! renamed into place, and all numeric formatting is deterministic, so two
//! invocations with the same configuration produce byte-identical files.

pub mod calibrate;
pub mod config;
pub mod metrics;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

pub use calibrate::{
    calibrate_lerl_weight, default_weight_grid, CalibrationError, CalibrationPoint,
};
pub use config::{AgentSelection, ConfigError, EnvSelection, ExperimentConfig, Profile, SweepAxis};
pub use metrics::{
    curve_csv, episodes_to_convergence, metrics_csv, parse_curve_csv, stability_from_curve,
    sweep_summary, AlgorithmRows, MetricsRow, SummaryError,
};

use crate::agents::{train, EpisodeRecord, TrainedAgent};
use crate::env::Environment;
use crate::mec::MecEnv;
use crate::numfmt::format_sig;
use crate::queue::{PenaltySeries, RewardShaper, ShaperKind};
use crate::routing::RoutingEnv;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("environment construction failed: {0}")]
    Build(String),
}

/// Write-then-rename so concurrent writers never interleave bytes.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let tmp = path.with_extension("csv.tmp");
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(contents.as_bytes()).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

/// Compact float tag for file names: significant digits without trailing
/// zeros ("1", "0.25", "2.5").
pub fn compact_float(x: f64) -> String {
    let s = format_sig(x, 9);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// The shaper actually used by a run after applying the sweep multiplier.
fn effective_shaper(cfg: &ExperimentConfig, sweep_value: f64) -> RewardShaper {
    let multiplier = match cfg.sweep {
        SweepAxis::Weight(_) => sweep_value,
        _ => 1.0,
    };
    match cfg.shaper_kind {
        ShaperKind::Lerl => RewardShaper::lerl(cfg.w * multiplier),
        kind => RewardShaper::new(kind, cfg.v * multiplier, 0.0).expect("nonnegative weight"),
    }
}

fn weight_tag(shaper: &RewardShaper) -> String {
    match shaper.kind {
        ShaperKind::Lerl => compact_float(shaper.w),
        _ => compact_float(shaper.v),
    }
}

enum BuiltEnv {
    Mec(MecEnv),
    Routing(RoutingEnv),
}

fn build_env(cfg: &ExperimentConfig, sweep_value: f64, seed: u64) -> Result<BuiltEnv, RunError> {
    let arrival = match cfg.sweep {
        SweepAxis::Arrival(_) => Some(sweep_value),
        _ => None,
    };
    match &cfg.env {
        EnvSelection::Mec(mec) => {
            let mut mec = mec.clone();
            if let Some(a) = arrival {
                mec.arrival_rate = a;
            }
            MecEnv::new(mec, seed)
                .map(BuiltEnv::Mec)
                .map_err(|e| RunError::Build(e.to_string()))
        }
        EnvSelection::Routing(routing) => {
            let mut routing = routing.clone();
            if let Some(a) = arrival {
                routing.arrival_rate = a;
            }
            RoutingEnv::new(routing, seed)
                .map(BuiltEnv::Routing)
                .map_err(|e| RunError::Build(e.to_string()))
        }
    }
}

/// Slot-level accumulator shared by evaluation and the baseline curve.
#[derive(Default)]
struct SlotStats {
    rewards: f64,
    penalties: PenaltySeries,
    backlog_totals: Vec<f64>,
    backlog_samples: Vec<f64>,
    injected: Vec<f64>,
    steps: usize,
}

impl SlotStats {
    fn push(&mut self, reward: f64, penalty: f64, backlogs: &[f64], injected: Option<f64>) {
        self.rewards += reward;
        self.penalties.push(penalty);
        self.backlog_totals.push(backlogs.iter().sum());
        self.backlog_samples.extend_from_slice(backlogs);
        if let Some(bits) = injected {
            self.injected.push(bits);
        }
        self.steps += 1;
    }

    fn mean_queue(&self) -> f64 {
        self.backlog_totals.iter().sum::<f64>() / self.steps.max(1) as f64
    }

    fn queue_std(&self) -> f64 {
        let n = self.backlog_samples.len().max(1) as f64;
        let mean = self.backlog_samples.iter().sum::<f64>() / n;
        (self
            .backlog_samples
            .iter()
            .map(|q| (q - mean) * (q - mean))
            .sum::<f64>()
            / n)
            .sqrt()
    }

    fn episode_record(&self, episode: usize) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            mean_reward: self.rewards / self.steps.max(1) as f64,
            mean_total_backlog: self.mean_queue(),
            mean_penalty: self.penalties.time_average().unwrap_or(0.0),
            backlog_std: self.queue_std(),
        }
    }
}

fn eval_greedy(
    env: &mut BuiltEnv,
    agent: Option<&TrainedAgent>,
    shaper: &RewardShaper,
    slots: usize,
) -> SlotStats {
    let mut stats = SlotStats::default();
    match env {
        BuiltEnv::Mec(env) => {
            let mut obs = env.reset();
            let agent = agent.expect("offloading runs always carry a policy");
            for _ in 0..slots {
                let action = agent.act_greedy(&obs);
                let tr = Environment::step(env, &action).expect("greedy actions stay in bounds");
                let reward = tr.shaped_reward(shaper).expect("dimensions agree");
                stats.push(reward, tr.penalty, tr.backlogs_after.lengths(), None);
                obs = tr.next_obs;
            }
        }
        BuiltEnv::Routing(env) => {
            let mut obs = env.reset();
            for _ in 0..slots {
                let before = env.total_injected();
                let tr = match agent {
                    Some(agent) => {
                        let action = agent.act_greedy(&obs);
                        Environment::step(env, &action).expect("greedy actions stay in bounds")
                    }
                    None => {
                        let pattern = env.baseline_pattern();
                        env.step_pattern(&pattern).expect("baseline is valid").0
                    }
                };
                let injected = env.total_injected() - before;
                let reward = tr.shaped_reward(shaper).expect("dimensions agree");
                stats.push(
                    reward,
                    tr.penalty,
                    tr.backlogs_after.lengths(),
                    Some(injected),
                );
                obs = tr.next_obs;
            }
        }
    }
    stats
}

/// Run the untrained max-weight baseline for the configured episode count so
/// its rows carry a curve like every other algorithm.
fn baseline_curve(
    env: &mut RoutingEnv,
    shaper: &RewardShaper,
    cfg: &ExperimentConfig,
) -> Vec<EpisodeRecord> {
    let mut curve = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        env.reset();
        let mut stats = SlotStats::default();
        for _ in 0..cfg.steps_per_episode {
            let pattern = env.baseline_pattern();
            let (tr, _) = env.step_pattern(&pattern).expect("baseline is valid");
            let reward = tr.shaped_reward(shaper).expect("dimensions agree");
            stats.push(reward, tr.penalty, tr.backlogs_after.lengths(), None);
        }
        curve.push(stats.episode_record(episode));
    }
    curve
}

/// Result of one (sweep value, seed) cell.
pub struct RunResult {
    pub row: MetricsRow,
    pub curve: Vec<EpisodeRecord>,
    pub curve_file: String,
}

fn run_one(cfg: &ExperimentConfig, sweep_value: f64, seed: u64) -> Result<RunResult, RunError> {
    let shaper = effective_shaper(cfg, sweep_value);
    let mut env = build_env(cfg, sweep_value, seed)?;
    let env_name = cfg.env.name();
    let agent_name = cfg.agent.name();
    let curve_file = format!(
        "{env_name}_{}_{agent_name}_V{}_seed{seed}.csv",
        shaper.kind.name(),
        weight_tag(&shaper),
    );

    let (curve, agent, failed) = match cfg.agent {
        AgentSelection::Backpressure => {
            let BuiltEnv::Routing(renv) = &mut env else {
                return Err(RunError::Build(
                    "the max-weight baseline only applies to the routing environment".into(),
                ));
            };
            let curve = baseline_curve(renv, &shaper, cfg);
            (curve, None, false)
        }
        _ => {
            let agent_cfg = cfg.agent_config();
            let result = match &mut env {
                BuiltEnv::Mec(e) => train(e, &shaper, &agent_cfg, seed),
                BuiltEnv::Routing(e) => train(e, &shaper, &agent_cfg, seed),
            };
            match result {
                Ok(outcome) => (outcome.curve, Some(outcome.agent), false),
                Err(crate::agents::TrainError::NonFiniteLoss { partial, .. }) => {
                    (partial, None, true)
                }
                Err(other) => return Err(RunError::Build(other.to_string())),
            }
        }
    };

    let row = if failed {
        MetricsRow {
            sweep_value,
            seed,
            mean_energy: f64::NAN,
            mean_queue: f64::NAN,
            queue_std: f64::NAN,
            latency: None,
            stability_score: f64::NAN,
            episodes_to_convergence: None,
            failed: true,
        }
    } else {
        let stats = eval_greedy(&mut env, agent.as_ref(), &shaper, cfg.eval_slots);
        let latency = match &env {
            BuiltEnv::Routing(_) => {
                crate::routing::end_to_end_latency(&stats.backlog_totals, &stats.injected)
            }
            BuiltEnv::Mec(_) => None,
        };
        let backlogs: Vec<f64> = curve.iter().map(|r| r.mean_total_backlog).collect();
        let rewards: Vec<f64> = curve.iter().map(|r| r.mean_reward).collect();
        MetricsRow {
            sweep_value,
            seed,
            mean_energy: stats.penalties.time_average().unwrap_or(f64::NAN),
            mean_queue: stats.mean_queue(),
            queue_std: stats.queue_std(),
            latency,
            stability_score: stability_from_curve(
                &backlogs,
                cfg.steps_per_episode,
                cfg.stability_window,
            ),
            episodes_to_convergence: episodes_to_convergence(&rewards),
            failed: false,
        }
    };

    Ok(RunResult {
        row,
        curve,
        curve_file,
    })
}

/// Execute the full experiment: every (sweep value, seed) cell, one curve
/// file per cell, a `metrics.csv` with one row per cell, and an
/// `aggregate.csv` with per-sweep-value mean and standard deviation across
/// seeds. Returns the rows in (sweep value, seed) order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>, RunError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|source| RunError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;

    let sweep_values = cfg.sweep.values();
    let jobs: Vec<(f64, u64)> = sweep_values
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();

    let next_job = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunResult, RunError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = cfg.workers.clamp(1, jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next_job.fetch_add(1, Ordering::SeqCst);
                if index >= jobs.len() {
                    break;
                }
                let (sweep_value, seed) = jobs[index];
                let outcome = run_one(cfg, sweep_value, seed).and_then(|result| {
                    write_atomic(
                        &cfg.out_dir.join(&result.curve_file),
                        &curve_csv(&result.curve),
                    )
                    .map(|()| result)
                });
                results.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(jobs.len());
    for slot in results.into_inner().unwrap() {
        let result = slot.expect("every job ran")?;
        rows.push(result.row);
    }

    write_atomic(&cfg.out_dir.join("metrics.csv"), &metrics_csv(&rows))?;
    write_atomic(&cfg.out_dir.join("aggregate.csv"), &aggregate_csv(&rows))?;
    Ok(rows)
}

/// Per-sweep-value mean and standard deviation across seeds. Rows are
/// grouped by sweep value and sorted by seed before summing, so the output
/// does not depend on the order seeds were listed.
pub fn aggregate_csv(rows: &[MetricsRow]) -> String {
    let mut sweep_values: Vec<f64> = rows.iter().map(|r| r.sweep_value).collect();
    sweep_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sweep_values.dedup();

    let mut out = String::from(
        "sweep_value,n_seeds,mean_energy_mean,mean_energy_std,mean_queue_mean,mean_queue_std,queue_std_mean,queue_std_std,latency_mean,latency_std,stability_mean,stability_std\n",
    );
    for &value in &sweep_values {
        let mut group: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.sweep_value == value && !r.failed)
            .collect();
        group.sort_by_key(|r| r.seed);
        let n = group.len();
        let stat = |select: &dyn Fn(&MetricsRow) -> f64| -> (f64, f64) {
            if group.is_empty() {
                return (f64::NAN, f64::NAN);
            }
            let mean = group.iter().map(|r| select(r)).sum::<f64>() / n as f64;
            let var = group
                .iter()
                .map(|r| (select(r) - mean) * (select(r) - mean))
                .sum::<f64>()
                / n as f64;
            (mean, var.sqrt())
        };
        let (e_mean, e_std) = stat(&|r| r.mean_energy);
        let (q_mean, q_std) = stat(&|r| r.mean_queue);
        let (s_mean, s_std) = stat(&|r| r.queue_std);
        let (st_mean, st_std) = stat(&|r| r.stability_score);
        let latencies: Vec<f64> = group.iter().filter_map(|r| r.latency).collect();
        let (l_mean, l_std) = if latencies.is_empty() {
            (None, None)
        } else {
            let mean = latencies.iter().sum::<f64>() / latencies.len() as f64;
            let var = latencies
                .iter()
                .map(|l| (l - mean) * (l - mean))
                .sum::<f64>()
                / latencies.len() as f64;
            (Some(mean), Some(var.sqrt()))
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            format_sig(value, 9),
            n,
            format_sig(e_mean, 9),
            format_sig(e_std, 9),
            format_sig(q_mean, 9),
            format_sig(q_std, 9),
            format_sig(s_mean, 9),
            format_sig(s_std, 9),
            l_mean.map_or(String::new(), |v| format_sig(v, 9)),
            l_std.map_or(String::new(), |v| format_sig(v, 9)),
            format_sig(st_mean, 9),
            format_sig(st_std, 9),
        ));
    }
    out
}
