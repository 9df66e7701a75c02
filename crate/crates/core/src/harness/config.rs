//! Flat key-value experiment configuration.
//!
//! One text file describes a whole experiment: `key = value` lines, `#`
//! comments, lists comma-separated. Environment fields use the exact names
//! of the corresponding simulator configs (`K`, `lambda`, `d_max`, `B`,
//! `sigma`, `cL_max`, `cE_max`, `P_max`, `eta_user`, `eta_bs`, `delta_t`,
//! `V` for the offloading environment; `n_nodes`, `k_nn`, `p_link`, `R_E`,
//! `lambda_r`, `eta1`, `eta2`, `d_max`, `n_sources`, `delta_t`, `V` for
//! routing).

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::agents::{AgentConfig, DqnConfig, PpoConfig};
use crate::mec::MecConfig;
use crate::queue::ShaperKind;
use crate::routing::RoutingConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: cannot parse `{value}`: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("seeds must be nonempty")]
    EmptySeeds,
    #[error("sweep values must be strictly increasing")]
    SweepNotIncreasing,
    #[error("environment config invalid: {0}")]
    Env(String),
}

/// Parse `key = value` lines into an ordered map.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: lineno + 1,
                text: raw.to_string(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }
    Ok(map)
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|item| parse_field(key, item.trim()))
        .collect()
}

/// Offloading environment keys, exactly as documented.
pub fn mec_from_kv(map: &BTreeMap<String, String>) -> Result<MecConfig, ConfigError> {
    mec_from_kv_with_default(map, MecConfig::default().users)
}

fn mec_from_kv_with_default(
    map: &BTreeMap<String, String>,
    default_users: usize,
) -> Result<MecConfig, ConfigError> {
    let mut cfg = MecConfig::with_users(default_users);
    if let Some(v) = map.get("K") {
        cfg.users = parse_field("K", v)?;
        cfg.local_energy_per_bit = vec![1.0e-3; cfg.users];
    }
    if let Some(v) = map.get("lambda") {
        cfg.arrival_rate = parse_field("lambda", v)?;
    }
    if let Some(v) = map.get("d_max") {
        cfg.max_task_bits = parse_field("d_max", v)?;
    }
    if let Some(v) = map.get("B") {
        cfg.bandwidth_hz = parse_field("B", v)?;
    }
    if let Some(v) = map.get("sigma") {
        cfg.noise_power = parse_field("sigma", v)?;
    }
    if let Some(v) = map.get("cL_max") {
        cfg.local_cap = parse_field("cL_max", v)?;
    }
    if let Some(v) = map.get("cE_max") {
        cfg.edge_cap = parse_field("cE_max", v)?;
    }
    if let Some(v) = map.get("P_max") {
        cfg.power_cap = parse_field("P_max", v)?;
    }
    if let Some(v) = map.get("eta_user") {
        let values: Vec<f64> = parse_list("eta_user", v)?;
        cfg.local_energy_per_bit = if values.len() == 1 {
            vec![values[0]; cfg.users]
        } else {
            values
        };
    }
    if let Some(v) = map.get("eta_bs") {
        cfg.edge_energy_per_bit = parse_field("eta_bs", v)?;
    }
    if let Some(v) = map.get("delta_t") {
        cfg.slot_secs = parse_field("delta_t", v)?;
    }
    if let Some(v) = map.get("V") {
        cfg.v_weight = parse_field("V", v)?;
    }
    cfg.validate()
        .map_err(|e| ConfigError::Env(e.to_string()))?;
    Ok(cfg)
}

/// Serialize back to the same flat key-value form.
pub fn mec_to_kv(cfg: &MecConfig) -> String {
    use crate::numfmt::format_sig;
    let eta: Vec<String> = cfg
        .local_energy_per_bit
        .iter()
        .map(|&e| format_sig(e, 9))
        .collect();
    format!(
        "K = {}\nlambda = {}\nd_max = {}\nB = {}\nsigma = {}\ncL_max = {}\ncE_max = {}\nP_max = {}\neta_user = {}\neta_bs = {}\ndelta_t = {}\nV = {}\n",
        cfg.users,
        format_sig(cfg.arrival_rate, 9),
        format_sig(cfg.max_task_bits, 9),
        format_sig(cfg.bandwidth_hz, 9),
        format_sig(cfg.noise_power, 9),
        format_sig(cfg.local_cap, 9),
        format_sig(cfg.edge_cap, 9),
        format_sig(cfg.power_cap, 9),
        eta.join(","),
        format_sig(cfg.edge_energy_per_bit, 9),
        format_sig(cfg.slot_secs, 9),
        format_sig(cfg.v_weight, 9),
    )
}

/// Routing environment keys.
pub fn routing_from_kv(map: &BTreeMap<String, String>) -> Result<RoutingConfig, ConfigError> {
    let mut cfg = RoutingConfig::default();
    if let Some(v) = map.get("n_nodes") {
        cfg.nodes = parse_field("n_nodes", v)?;
    }
    if let Some(v) = map.get("k_nn") {
        cfg.nearest_neighbors = parse_field("k_nn", v)?;
    }
    if let Some(v) = map.get("p_link") {
        cfg.link_prob = parse_field("p_link", v)?;
    }
    if let Some(v) = map.get("R_E") {
        cfg.mean_rate = parse_field("R_E", v)?;
    }
    if let Some(v) = map.get("lambda_r") {
        cfg.arrival_rate = parse_field("lambda_r", v)?;
    }
    if let Some(v) = map.get("d_max") {
        cfg.max_task_bits = parse_field("d_max", v)?;
    }
    if let Some(v) = map.get("eta1") {
        cfg.energy_linear = parse_field("eta1", v)?;
    }
    if let Some(v) = map.get("eta2") {
        cfg.energy_quadratic = parse_field("eta2", v)?;
    }
    if let Some(v) = map.get("delta_t") {
        cfg.slot_secs = parse_field("delta_t", v)?;
    }
    if let Some(v) = map.get("V") {
        cfg.v_weight = parse_field("V", v)?;
    }
    if let Some(v) = map.get("n_sources") {
        cfg.sources = parse_field("n_sources", v)?;
    }
    cfg.validate()
        .map_err(|e| ConfigError::Env(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSelection {
    Mec(MecConfig),
    Routing(RoutingConfig),
}

impl EnvSelection {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSelection::Mec(_) => "mec",
            EnvSelection::Routing(_) => "routing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentSelection {
    Ppo,
    Dqn,
    /// The untrained max-weight baseline; routing only.
    Backpressure,
}

impl AgentSelection {
    pub fn name(self) -> &'static str {
        match self {
            AgentSelection::Ppo => "ppo",
            AgentSelection::Dqn => "dqn",
            AgentSelection::Backpressure => "backpressure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    None,
    /// Multiplies the shaper weight (V, or w for the latency/energy shaper).
    Weight(Vec<f64>),
    /// Replaces the environment arrival rate.
    Arrival(Vec<f64>),
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::None => vec![1.0],
            SweepAxis::Weight(v) | SweepAxis::Arrival(v) => v.clone(),
        }
    }
}

/// Full seeded description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSelection,
    pub agent: AgentSelection,
    pub shaper_kind: ShaperKind,
    /// Lyapunov weight at sweep value 1.
    pub v: f64,
    /// Latency weight at sweep value 1 (latency/energy shaper only).
    pub w: f64,
    pub seeds: Vec<u64>,
    pub sweep: SweepAxis,
    pub out_dir: PathBuf,
    pub stability_threshold: f64,
    /// Trailing episodes used for the stability score.
    pub stability_window: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Greedy evaluation slots after training.
    pub eval_slots: usize,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSelection::Mec(MecConfig::with_users(5)),
            agent: AgentSelection::Ppo,
            shaper_kind: ShaperKind::Ldptrlq,
            v: 1.0,
            w: 1.0,
            seeds: vec![1, 2, 3],
            sweep: SweepAxis::None,
            out_dir: PathBuf::from("results"),
            stability_threshold: 0.05,
            stability_window: 20,
            episodes: 200,
            steps_per_episode: 200,
            eval_slots: 2000,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parse the flat key-value text. `profile` ordering: the desk profile
    /// is the default; `paper` switches to the full-scale reference
    /// parameters before explicit keys override either.
    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_kv_text_with_overrides(text, &[])
    }

    /// Same as [`ExperimentConfig::from_kv_text`], with `(key, value)` pairs
    /// (typically command-line flags) replacing whatever the file says.
    pub fn from_kv_text_with_overrides(
        text: &str,
        overrides: &[(&str, String)],
    ) -> Result<Self, ConfigError> {
        let mut map = parse_kv(text)?;
        for (key, value) in overrides {
            map.insert((*key).to_string(), value.clone());
        }
        Self::from_kv_map(&map)
    }

    fn from_kv_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();

        match map.get("profile").map(String::as_str) {
            Some("paper") => cfg.apply_profile(Profile::Paper),
            Some("desk") | None => cfg.apply_profile(Profile::Desk),
            Some(other) => {
                return Err(ConfigError::BadValue {
                    key: "profile".into(),
                    value: other.into(),
                    message: "expected `desk` or `paper`".into(),
                })
            }
        }

        let env_kind = map.get("env").map(String::as_str).unwrap_or("mec");
        cfg.env = match env_kind {
            "mec" => {
                let profile_users = match &cfg.env {
                    EnvSelection::Mec(m) => m.users,
                    _ => MecConfig::default().users,
                };
                EnvSelection::Mec(mec_from_kv_with_default(map, profile_users)?)
            }
            "routing" => EnvSelection::Routing(routing_from_kv(map)?),
            other => {
                return Err(ConfigError::BadValue {
                    key: "env".into(),
                    value: other.into(),
                    message: "expected `mec` or `routing`".into(),
                })
            }
        };

        if let Some(v) = map.get("agent") {
            cfg.agent = match v.as_str() {
                "ppo" => AgentSelection::Ppo,
                "dqn" => AgentSelection::Dqn,
                "backpressure" => AgentSelection::Backpressure,
                other => {
                    return Err(ConfigError::BadValue {
                        key: "agent".into(),
                        value: other.into(),
                        message: "expected `ppo`, `dqn`, or `backpressure`".into(),
                    })
                }
            };
        }
        if let Some(v) = map.get("shaper") {
            cfg.shaper_kind = ShaperKind::parse(v).ok_or_else(|| ConfigError::BadValue {
                key: "shaper".into(),
                value: v.clone(),
                message: "expected ldptrlq | original_ldp | simplified_ldp | lerl".into(),
            })?;
        }
        if let Some(v) = map.get("V") {
            cfg.v = parse_field("V", v)?;
        }
        if let Some(v) = map.get("w") {
            cfg.w = parse_field("w", v)?;
        }
        if let Some(v) = map.get("seeds") {
            cfg.seeds = parse_list("seeds", v)?;
        }
        match (
            map.get("sweep").map(String::as_str),
            map.get("sweep_values"),
        ) {
            (None, None) | (Some("none"), _) => {}
            (Some(axis), Some(values)) => {
                let values: Vec<f64> = parse_list("sweep_values", values)?;
                cfg.sweep = match axis {
                    "V" => SweepAxis::Weight(values),
                    "lambda" => SweepAxis::Arrival(values),
                    other => {
                        return Err(ConfigError::BadValue {
                            key: "sweep".into(),
                            value: other.into(),
                            message: "expected `V`, `lambda`, or `none`".into(),
                        })
                    }
                };
            }
            (Some(_), None) => return Err(ConfigError::MissingKey("sweep_values")),
            (None, Some(_)) => return Err(ConfigError::MissingKey("sweep")),
        }
        if let Some(v) = map.get("out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some(v) = map.get("stability_threshold") {
            cfg.stability_threshold = parse_field("stability_threshold", v)?;
        }
        if let Some(v) = map.get("stability_window") {
            cfg.stability_window = parse_field("stability_window", v)?;
        }
        if let Some(v) = map.get("episodes") {
            cfg.episodes = parse_field("episodes", v)?;
        }
        if let Some(v) = map.get("steps_per_episode") {
            cfg.steps_per_episode = parse_field("steps_per_episode", v)?;
        }
        if let Some(v) = map.get("eval_slots") {
            cfg.eval_slots = parse_field("eval_slots", v)?;
        }
        if let Some(v) = map.get("workers") {
            cfg.workers = parse_field("workers", v)?;
        }

        const KNOWN: &[&str] = &[
            "profile",
            "env",
            "agent",
            "shaper",
            "V",
            "w",
            "seeds",
            "sweep",
            "sweep_values",
            "out_dir",
            "stability_threshold",
            "stability_window",
            "episodes",
            "steps_per_episode",
            "eval_slots",
            "workers",
            // offloading environment
            "K",
            "lambda",
            "d_max",
            "B",
            "sigma",
            "cL_max",
            "cE_max",
            "P_max",
            "eta_user",
            "eta_bs",
            "delta_t",
            // routing environment
            "n_nodes",
            "k_nn",
            "p_link",
            "R_E",
            "lambda_r",
            "eta1",
            "eta2",
            "n_sources",
        ];
        for key in map.keys() {
            if !KNOWN.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_profile(&mut self, profile: Profile) {
        match profile {
            Profile::Desk => {
                self.episodes = 200;
                self.steps_per_episode = 200;
                if let EnvSelection::Mec(mec) = &mut self.env {
                    mec.users = 5;
                    mec.local_energy_per_bit = vec![1.0e-3; 5];
                }
            }
            Profile::Paper => {
                self.episodes = 1000;
                self.steps_per_episode = 500;
                if let EnvSelection::Mec(mec) = &mut self.env {
                    mec.users = 10;
                    mec.local_energy_per_bit = vec![1.0e-3; 10];
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::EmptySeeds);
        }
        if let SweepAxis::Weight(values) | SweepAxis::Arrival(values) = &self.sweep {
            if values.windows(2).any(|w| w[0] >= w[1]) || values.is_empty() {
                return Err(ConfigError::SweepNotIncreasing);
            }
        }
        Ok(())
    }

    /// Trainer configuration derived from the experiment scale. Rewards
    /// are scaled by a fixed per-environment constant so typical shaped
    /// magnitudes are O(1) inside the agents.
    pub fn agent_config(&self) -> AgentConfig {
        let reward_scale = 1e-5;
        match self.agent {
            AgentSelection::Dqn => AgentConfig::Dqn(DqnConfig {
                steps_per_episode: self.steps_per_episode,
                max_episodes: self.episodes,
                reward_scale,
                ..DqnConfig::default()
            }),
            _ => AgentConfig::Ppo(PpoConfig {
                steps_per_episode: self.steps_per_episode,
                max_episodes: self.episodes,
                reward_scale,
                ..PpoConfig::default()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Paper,
}
