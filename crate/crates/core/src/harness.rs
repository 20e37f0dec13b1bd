//! Experiment configuration, replica orchestration and CSV output.
//!
//! A replica is one (policy, master seed) pair. The master seed is split
//! into topology, dynamics, exploration and weight-init substreams, so every
//! policy sees the same topology and the same dynamics trajectories for a
//! given seed. The learning agent trains for `agent.episodes` episodes and is
//! then evaluated greedily for `run.eval_episodes` episodes on dynamics
//! streams never used in training; baselines are rolled out over exactly the
//! same episodes. Summaries aggregate the evaluation phase.
//!
//! Episode CSV columns: `episode, phase, exploration_prob, steps,
//! mean_r_sync, mean_r_place, mean_r_total, sum_r_total, spr_detect_rate,
//! lb_loss, relocations`. Summary columns: `policy, seeds`, then
//! `<metric>_mean, <metric>_std` for each of [`SUMMARY_METRICS`]. Floats are
//! written in scientific notation with 9 significant digits.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, AgentError, Checkpoint, DqnAgent};
use crate::apps::{Application, ApplicationKind, LbConfig, SprConfig};
use crate::baselines::{RandomPolicy, RoundRobin};
use crate::envcore::{EnvConfig, EnvError, Environment};
use crate::netmodel::{generate_topology, DynamicsConfig, GenerationConfig, Topology, TopologyError};
use crate::policy::{run_episode, Policy, RolloutError};
use crate::record::{EpisodeRecord, Phase};
use crate::seeding::{self, Stream};

/// Mixed into the dynamics substream to separate evaluation episodes from
/// training episodes.
const EVAL_STREAM_TAG: u64 = 0x6576_616c;

pub const EPISODE_COLUMNS: [&str; 11] = [
    "episode",
    "phase",
    "exploration_prob",
    "steps",
    "mean_r_sync",
    "mean_r_place",
    "mean_r_total",
    "sum_r_total",
    "spr_detect_rate",
    "lb_loss",
    "relocations",
];

pub const SUMMARY_METRICS: [&str; 6] = [
    "spr_detect_rate",
    "lb_loss",
    "mean_r_place",
    "mean_r_sync",
    "mean_r_total",
    "relocations",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{policy} seed {seed}: non-finite values in episode {episode}")]
    NonFinite { policy: PolicyKind, seed: u64, episode: u64 },
    #[error("{policy} seed {seed}, episode {episode}: {source}")]
    Rollout {
        policy: PolicyKind,
        seed: u64,
        episode: u64,
        source: RolloutError,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Ddrl,
    RoundRobin,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Ddrl, PolicyKind::RoundRobin, PolicyKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ddrl => "ddrl",
            PolicyKind::RoundRobin => "round_robin",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected ddrl, round_robin or random)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApplicationConfig {
    pub kind: ApplicationKind,
    pub spr: SprConfig,
    pub lb: LbConfig,
}

impl Default for ApplicationConfig {
    fn default() -> Self {
        ApplicationConfig {
            kind: ApplicationKind::Spr,
            spr: SprConfig::default(),
            lb: LbConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policies: Vec<PolicyKind>,
    /// Master seeds, one replica per seed and policy.
    pub seeds: Vec<u64>,
    /// Greedy evaluation episodes after training.
    pub eval_episodes: u64,
    pub out_dir: PathBuf,
    /// Save a learning-agent checkpoint every this many training episodes.
    pub checkpoint_every: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            policies: PolicyKind::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            eval_episodes: 20,
            out_dir: PathBuf::from("out"),
            checkpoint_every: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generation: GenerationConfig,
    pub dynamics: DynamicsConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub application: ApplicationConfig,
    pub run: RunConfig,
}

fn field_err(section: &str, err: impl fmt::Display) -> HarnessError {
    let message = err.to_string();
    // sub-validators start their messages with the offending field name
    let first = message.split_whitespace().next().unwrap_or("");
    let field = if first.chars().all(|c| c.is_ascii_lowercase() || c == '_') { first } else { "" };
    HarnessError::Config {
        field: if field.is_empty() { section.to_string() } else { format!("{section}.{field}") },
        message,
    }
}

fn strip_prefix(msg: String) -> String {
    match msg.split_once(": ") {
        Some((head, rest)) if head.starts_with("invalid ") => rest.to_string(),
        _ => msg,
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every section; errors name the offending field as
    /// `section.field`.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.generation
            .validate()
            .map_err(|e| field_err("generation", strip_prefix(e.to_string())))?;
        self.dynamics
            .validate()
            .map_err(|e| field_err("dynamics", strip_prefix(e.to_string())))?;
        self.env
            .validate()
            .map_err(|e| field_err("env", strip_prefix(e.to_string())))?;
        self.agent
            .validate()
            .map_err(|e| field_err("agent", strip_prefix(e.to_string())))?;
        let app_err = |field: &str, message: String| HarnessError::Config {
            field: format!("application.{field}"),
            message,
        };
        if let Some(k) = self.application.spr.k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(app_err("spr.k", format!("must be > 0, got {k}")));
            }
        }
        if let Some(c) = self.application.lb.capacity_reference {
            if c < self.dynamics.capacity_bounds[1] {
                return Err(app_err(
                    "lb.capacity_reference",
                    format!("{c} is below the capacity upper bound {}", self.dynamics.capacity_bounds[1]),
                ));
            }
        }
        if self.application.kind == ApplicationKind::Lb && self.generation.servers_per_domain[1] == 0 {
            return Err(app_err("kind", "lb needs servers_per_domain to allow at least one server".into()));
        }
        let run_err = |field: &str, message: &str| HarnessError::Config {
            field: format!("run.{field}"),
            message: message.to_string(),
        };
        if self.run.policies.is_empty() {
            return Err(run_err("policies", "at least one policy is required"));
        }
        let mut seen = self.run.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.run.policies.len() {
            return Err(run_err("policies", "policies must be distinct"));
        }
        if self.run.seeds.is_empty() {
            return Err(run_err("seeds", "at least one seed is required"));
        }
        let mut seeds = self.run.seeds.clone();
        seeds.sort();
        seeds.dedup();
        if seeds.len() != self.run.seeds.len() {
            return Err(run_err("seeds", "seeds must be distinct"));
        }
        if self.run.eval_episodes < 1 {
            return Err(run_err("eval_episodes", "must be >= 1"));
        }
        if self.run.checkpoint_every == Some(0) {
            return Err(run_err("checkpoint_every", "must be >= 1 when set"));
        }
        Ok(())
    }

    pub fn application(&self) -> Application {
        match self.application.kind {
            ApplicationKind::Spr => Application::Spr { k: self.application.spr.k },
            ApplicationKind::Lb => Application::Lb {
                capacity_reference: self
                    .application
                    .lb
                    .capacity_reference
                    .unwrap_or(self.dynamics.capacity_bounds[1]),
            },
        }
    }

    /// The replica topology for master seed `seed`.
    pub fn topology(&self, seed: u64) -> Result<Topology, HarnessError> {
        let generation = GenerationConfig {
            rng_seed: seeding::substream(seed, Stream::Topology),
            ..self.generation.clone()
        };
        Ok(generate_topology(&generation)?)
    }

    pub fn environment(&self, seed: u64) -> Result<Environment, HarnessError> {
        Ok(Environment::new(
            self.topology(seed)?,
            self.env.clone(),
            self.application(),
            self.dynamics.clone(),
        )?)
    }
}

/// Dynamics seed of training episode `episode` (1-based).
pub fn train_dynamics_seed(master: u64, episode: u64) -> u64 {
    seeding::derive(seeding::substream(master, Stream::Dynamics), episode)
}

/// Dynamics seed of evaluation episode `episode` (1-based).
pub fn eval_dynamics_seed(master: u64, episode: u64) -> u64 {
    let stream = seeding::derive(seeding::substream(master, Stream::Dynamics), EVAL_STREAM_TAG);
    seeding::derive(stream, episode)
}

pub fn new_agent(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> Result<DqnAgent, HarnessError> {
    Ok(DqnAgent::for_env(
        env,
        cfg.agent.clone(),
        seeding::substream(seed, Stream::WeightInit),
        seeding::substream(seed, Stream::Exploration),
    )?)
}

struct Replica<'a> {
    policy: PolicyKind,
    seed: u64,
    records: Vec<EpisodeRecord>,
    checkpoint_dir: Option<&'a Path>,
    checkpoint_every: Option<u64>,
}

impl Replica<'_> {
    fn episode(
        &mut self,
        env: &mut Environment,
        policy: &mut dyn Policy,
        episode: u64,
        phase: Phase,
        dynamics_seed: u64,
    ) -> Result<(), HarnessError> {
        env.set_dynamics_seed(dynamics_seed);
        let (kind, seed) = (self.policy, self.seed);
        let rec = run_episode(env, policy, episode, phase).map_err(|source| match source {
            RolloutError::Agent(AgentError::NonFinite { .. }) => HarnessError::NonFinite {
                policy: kind,
                seed,
                episode,
            },
            source => HarnessError::Rollout {
                policy: kind,
                seed,
                episode,
                source,
            },
        })?;
        if !rec.is_finite() {
            return Err(HarnessError::NonFinite {
                policy: kind,
                seed,
                episode,
            });
        }
        self.records.push(rec);
        Ok(())
    }
}

/// Runs one replica and returns its training-phase then evaluation-phase
/// records. With `checkpoint_dir` set, the learning agent is saved there
/// every `run.checkpoint_every` episodes and after training.
pub fn run_replica(
    cfg: &ExperimentConfig,
    policy: PolicyKind,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut env = cfg.environment(seed)?;
    let mut replica = Replica {
        policy,
        seed,
        records: Vec::new(),
        checkpoint_dir,
        checkpoint_every: cfg.run.checkpoint_every,
    };
    let episodes = cfg.agent.episodes;
    match policy {
        PolicyKind::Ddrl => {
            let mut agent = new_agent(cfg, &env, seed)?;
            for e in 1..=episodes {
                agent.begin_episode(e);
                replica.episode(&mut env, &mut agent, e, Phase::Train, train_dynamics_seed(seed, e))?;
                if let (Some(dir), Some(every)) = (replica.checkpoint_dir, replica.checkpoint_every) {
                    if e % every == 0 {
                        save_checkpoint(&agent, &dir.join(format!("checkpoint_{seed}_ep{e}.json")))?;
                    }
                }
            }
            if let Some(dir) = replica.checkpoint_dir {
                save_checkpoint(&agent, &dir.join(format!("checkpoint_{seed}.json")))?;
            }
            agent.freeze();
            for e in 1..=cfg.run.eval_episodes {
                replica.episode(&mut env, &mut agent, e, Phase::Eval, eval_dynamics_seed(seed, e))?;
            }
        }
        PolicyKind::RoundRobin | PolicyKind::Random => {
            let mut baseline: Box<dyn Policy> = match policy {
                PolicyKind::RoundRobin => Box::new(RoundRobin),
                _ => Box::new(RandomPolicy::new(seeding::substream(seed, Stream::Exploration))),
            };
            for e in 1..=episodes {
                replica.episode(&mut env, baseline.as_mut(), e, Phase::Train, train_dynamics_seed(seed, e))?;
            }
            for e in 1..=cfg.run.eval_episodes {
                replica.episode(&mut env, baseline.as_mut(), e, Phase::Eval, eval_dynamics_seed(seed, e))?;
            }
        }
    }
    Ok(replica.records)
}

/// Greedy evaluation of a trained agent on seed `seed`'s held-out episodes.
pub fn evaluate_agent(cfg: &ExperimentConfig, agent: &mut DqnAgent, seed: u64) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut env = cfg.environment(seed)?;
    agent.freeze();
    let mut replica = Replica {
        policy: PolicyKind::Ddrl,
        seed,
        records: Vec::new(),
        checkpoint_dir: None,
        checkpoint_every: None,
    };
    for e in 1..=cfg.run.eval_episodes {
        replica.episode(&mut env, agent, e, Phase::Eval, eval_dynamics_seed(seed, e))?;
    }
    Ok(replica.records)
}

fn save_checkpoint(agent: &DqnAgent, path: &Path) -> Result<(), HarnessError> {
    Checkpoint::capture(agent).save(path).map_err(|e| match e {
        AgentError::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        e => e.into(),
    })
}

/// Scientific notation with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EPISODE_COLUMNS)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.phase.to_string(),
            fmt_float(r.exploration_prob),
            r.steps.to_string(),
            fmt_float(r.mean_r_sync),
            fmt_float(r.mean_r_place),
            fmt_float(r.mean_r_total),
            fmt_float(r.sum_r_total),
            fmt_float(r.spr_detect_rate),
            fmt_float(r.lb_loss),
            r.relocations.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Evaluation-phase means of [`SUMMARY_METRICS`] for one replica.
pub fn replica_metrics(records: &[EpisodeRecord]) -> [f64; 6] {
    let eval: Vec<&EpisodeRecord> = records.iter().filter(|r| r.phase == Phase::Eval).collect();
    let mean = |f: fn(&EpisodeRecord) -> f64| {
        if eval.is_empty() {
            0.0
        } else {
            eval.iter().map(|r| f(r)).sum::<f64>() / eval.len() as f64
        }
    };
    [
        mean(|r| r.spr_detect_rate),
        mean(|r| r.lb_loss),
        mean(|r| r.mean_r_place),
        mean(|r| r.mean_r_sync),
        mean(|r| r.mean_r_total),
        mean(|r| r.relocations as f64),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub seeds: Vec<u64>,
    /// Per-seed values of [`SUMMARY_METRICS`], in seed order.
    pub per_seed: Vec<[f64; 6]>,
    pub mean: [f64; 6],
    /// Sample standard deviation over seeds; zero for a single seed.
    pub std: [f64; 6],
}

impl PolicySummary {
    pub fn new(policy: PolicyKind, seeds: Vec<u64>, per_seed: Vec<[f64; 6]>) -> Self {
        let n = per_seed.len() as f64;
        let mut mean = [0.0; 6];
        let mut std = [0.0; 6];
        for m in 0..6 {
            mean[m] = per_seed.iter().map(|v| v[m]).sum::<f64>() / n;
            if per_seed.len() > 1 {
                let ss: f64 = per_seed.iter().map(|v| (v[m] - mean[m]).powi(2)).sum();
                std[m] = (ss / (n - 1.0)).sqrt();
            }
        }
        PolicySummary {
            policy,
            seeds,
            per_seed,
            mean,
            std,
        }
    }

    pub fn metric(&self, name: &str) -> f64 {
        let i = SUMMARY_METRICS
            .iter()
            .position(|&m| m == name)
            .unwrap_or_else(|| panic!("unknown metric {name}"));
        self.mean[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub policies: Vec<PolicySummary>,
}

impl ExperimentSummary {
    pub fn get(&self, policy: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }
}

fn summary_header(prefix: &[&str]) -> Vec<String> {
    let mut header: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    header.push("seeds".into());
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    header
}

fn summary_row(prefix: Vec<String>, p: &PolicySummary) -> Vec<String> {
    let mut row = prefix;
    row.push(p.seeds.len().to_string());
    for m in 0..SUMMARY_METRICS.len() {
        row.push(fmt_float(p.mean[m]));
        row.push(fmt_float(p.std[m]));
    }
    row
}

pub fn write_summary(path: &Path, summary: &ExperimentSummary) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header(&["policy"]))?;
    for p in &summary.policies {
        w.write_record(summary_row(vec![p.policy.to_string()], p))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Runs every (policy, seed) replica, writing `episodes_<policy>_<seed>.csv`
/// for each and `summary.csv` into `run.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let out = &cfg.run.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut policies = Vec::new();
    for &policy in &cfg.run.policies {
        let mut per_seed = Vec::new();
        for &seed in &cfg.run.seeds {
            let ckpt = (policy == PolicyKind::Ddrl && cfg.run.checkpoint_every.is_some()).then_some(out.as_path());
            let records = run_replica(cfg, policy, seed, ckpt)?;
            write_episodes(&out.join(format!("episodes_{policy}_{seed}.csv")), &records)?;
            per_seed.push(replica_metrics(&records));
        }
        policies.push(PolicySummary::new(policy, cfg.run.seeds.clone(), per_seed));
    }
    let summary = ExperimentSummary { policies };
    write_summary(&out.join("summary.csv"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Tau,
    BudgetFraction,
    NumDomains,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::BudgetFraction => "budget_fraction",
            SweepParam::NumDomains => "num_domains",
        }
    }

    /// `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, HarnessError> {
        let mut out = cfg.clone();
        let integral = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as u64)
            } else {
                Err(HarnessError::Config {
                    field: format!("sweep.{}", self.name()),
                    message: format!("value {value} must be a positive integer"),
                })
            }
        };
        match self {
            SweepParam::Tau => out.env.tau = integral()?,
            SweepParam::BudgetFraction => out.env.budget_fraction = value,
            SweepParam::NumDomains => out.generation.num_domains = integral()? as usize,
        }
        Ok(out)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [SweepParam::Tau, SweepParam::BudgetFraction, SweepParam::NumDomains]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown sweep parameter `{s}` (expected tau, budget_fraction or num_domains)"))
    }
}

/// One experiment per value, each in `<out_dir>/<param>_<value>/`, plus
/// `sweep_<param>.csv` with one row per (value, policy).
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<(f64, ExperimentSummary)>, HarnessError> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(HarnessError::Config {
            field: format!("sweep.{param}"),
            message: "at least one value is required".into(),
        });
    }
    let out = &cfg.run.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut results = Vec::new();
    for &value in values {
        let mut sub = param.apply(cfg, value)?;
        sub.run.out_dir = out.join(format!("{param}_{value}"));
        results.push((value, run_experiment(&sub)?));
    }
    let path = out.join(format!("sweep_{param}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(summary_header(&["value", "policy"]))?;
    for (value, summary) in &results {
        for p in &summary.policies {
            w.write_record(summary_row(vec![value.to_string(), p.policy.to_string()], p))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(results)
}

/// The action-order convention followed by the flat enumeration for the
/// environment built from `cfg` and `seed`.
pub fn describe_actions(cfg: &ExperimentConfig, seed: u64) -> Result<String, HarnessError> {
    cfg.validate()?;
    let env = cfg.environment(seed)?;
    let mut out = String::new();
    for line in crate::envcore::ACTION_ORDER.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&env.action_space().describe());
    Ok(out)
}
