//! Command-line entry point for running experiments, sweeps, calibration,
//! and topology generation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftq::harness::{
    self, calibrate_lerl_weight, default_weight_grid, run_experiment, CalibrationPoint,
    EnvSelection, ExperimentConfig, RunError, SweepAxis,
};
use driftq::numfmt::format_sig;
use driftq::queue::ShaperKind;
use driftq::routing::{generate_topology, write_topology, RoutingConfig};

#[derive(Parser)]
#[command(
    name = "driftq",
    about = "Queueing-network optimization experiments: drift-plus-penalty reward shaping, offloading and routing simulators, policy-optimization trainers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every (sweep value, seed) cell of a config.
    Run(RunArgs),
    /// Like `run`, but requires the config to declare a sweep axis.
    Sweep(RunArgs),
    /// Grid-search the latency/energy shaper weight against a reference
    /// run and report the weight to treat as 1.
    Calibrate(RunArgs),
    /// Generate a random connected topology and write its text form.
    TopoGen(TopoGenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scale profile: `desk` (default) or `paper`.
    #[arg(long)]
    profile: Option<String>,
    /// Concurrent runs.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TopoGenArgs {
    /// Optional config supplying the routing keys (n_nodes, k_nn, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Output file for the `node`/`link` text format.
    #[arg(long)]
    out: PathBuf,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_TRAINING: u8 = 2;

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(seed) = args.seed {
        overrides.push(("seeds", seed.to_string()));
    }
    if let Some(out) = &args.out {
        overrides.push(("out_dir", out.display().to_string()));
    }
    if let Some(profile) = &args.profile {
        overrides.push(("profile", profile.clone()));
    }
    if let Some(workers) = args.workers {
        overrides.push(("workers", workers.to_string()));
    }
    ExperimentConfig::from_kv_text_with_overrides(&text, &overrides).map_err(|e| e.to_string())
}

fn exit_for_run_error(err: &RunError) -> ExitCode {
    match err {
        RunError::Config(_) | RunError::Io { .. } | RunError::Build(_) => {
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn cmd_run(args: &RunArgs, require_sweep: bool) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("configuration error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if require_sweep && matches!(cfg.sweep, SweepAxis::None) {
        eprintln!("configuration error: `sweep` requires a sweep axis (sweep = V | lambda)");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run_experiment(&cfg) {
        Ok(rows) => {
            let failures = rows.iter().filter(|r| r.failed).count();
            println!(
                "{} run(s) complete, {} failed; outputs in {}",
                rows.len(),
                failures,
                cfg.out_dir.display()
            );
            if failures > 0 {
                ExitCode::from(EXIT_TRAINING)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("run failed: {err}");
            exit_for_run_error(&err)
        }
    }
}

/// Train one run and summarize it as a calibration point.
fn calibration_point(
    cfg: &ExperimentConfig,
    shaper_kind: ShaperKind,
    weight: f64,
) -> Result<CalibrationPoint, RunError> {
    let mut one = cfg.clone();
    one.sweep = SweepAxis::None;
    one.seeds = vec![cfg.seeds[0]];
    one.shaper_kind = shaper_kind;
    match shaper_kind {
        ShaperKind::Lerl => one.w = weight,
        _ => one.v = weight,
    }
    one.out_dir = cfg.out_dir.join(format!(
        "calib_{}_{}",
        shaper_kind.name(),
        harness::compact_float(weight)
    ));
    let rows = run_experiment(&one)?;
    let row = &rows[0];
    Ok(CalibrationPoint {
        mean_energy: row.mean_energy,
        mean_queue: row.mean_queue,
        stable: !row.failed && row.stability_score < cfg.stability_threshold,
    })
}

fn cmd_calibrate(args: &RunArgs) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("configuration error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    println!("training the reference run (ldptrlq, V = {})", cfg.v);
    let reference = match calibration_point(&cfg, ShaperKind::Ldptrlq, cfg.v) {
        Ok(point) if point.stable => (point.mean_energy, point.mean_queue),
        Ok(_) => {
            eprintln!("training failure: the reference run is unstable");
            return ExitCode::from(EXIT_TRAINING);
        }
        Err(err) => {
            eprintln!("reference run failed: {err}");
            return exit_for_run_error(&err);
        }
    };

    let grid = default_weight_grid();
    let mut failure: Option<RunError> = None;
    let result = calibrate_lerl_weight(&grid, reference, |w| {
        println!("evaluating latency/energy weight {}", format_sig(w, 4));
        match calibration_point(&cfg, ShaperKind::Lerl, w) {
            Ok(point) => point,
            Err(err) => {
                failure.get_or_insert(err);
                CalibrationPoint {
                    mean_energy: f64::NAN,
                    mean_queue: f64::NAN,
                    stable: false,
                }
            }
        }
    });
    if let Some(err) = failure {
        eprintln!("calibration run failed: {err}");
        return exit_for_run_error(&err);
    }
    match result {
        Ok(weight) => {
            println!(
                "calibrated weight (normalize to 1): {}",
                format_sig(weight, 9)
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("calibration failed: {err}");
            ExitCode::from(EXIT_TRAINING)
        }
    }
}

fn cmd_topo_gen(args: &TopoGenArgs) -> ExitCode {
    let routing: RoutingConfig = match &args.config {
        None => RoutingConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("configuration error: cannot read {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match ExperimentConfig::from_kv_text_with_overrides(
                &text,
                &[("env", "routing".to_string())],
            ) {
                Ok(cfg) => match cfg.env {
                    EnvSelection::Routing(routing) => routing,
                    EnvSelection::Mec(_) => unreachable!("env override forces routing"),
                },
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
        }
    };
    let graph = generate_topology(args.seed, &routing);
    let text = write_topology(&graph);
    if let Err(e) = std::fs::write(&args.out, text) {
        eprintln!("cannot write {}: {e}", args.out.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    println!(
        "topology with {} nodes and {} directed links written to {}",
        graph.node_count(),
        graph.links.len(),
        args.out.display()
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_run(args, true),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::TopoGen(args) => cmd_topo_gen(args),
    }
}
