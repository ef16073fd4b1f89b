//! Training campaigns.
//!
//! A campaign is either a single phase trained from scratch or a source
//! phase gated by the transfer controller followed by a target phase that
//! starts from the source networks. Each round, `W` workers run
//! `episodes_per_round / W` episodes against a frozen parameter snapshot;
//! the pooled batch drives one PPO update and then, episode by episode, the
//! controller.
//!
//! Every episode draws from its own random stream keyed by
//! `(seed, phase, episode index)`, so the worker count changes throughput
//! only.

pub mod metrics;
pub mod report;

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aeroenv::{
    build_design, step, AeroResult, EpisodeStatus, Environment, Fidelity, HighFidelity, LowFidelity,
    StateDistribution, DEFAULT_PENALTY,
};
use crate::agent::{NetworkConfig, PolicyParams};
use crate::checkpoint::Checkpoint;
use crate::ctl::{transfer, CtlConfig, TransferController};
use crate::geometry::{AirfoilShape, DesignVector, GeometryBounds, DESIGN_DIM};
use crate::ppo::{self, Adam, EpisodeRecord, ExperienceBatch, PpoConfig, PpoError, UpdateStats};
use crate::rng::stream_rng;
use metrics::{default_threshold, episodes_to_threshold, tail_stats, trailing_means, TailStats};

pub const SCHEMA_VERSION: u32 = 1;

/// Consecutive discarded updates after which a phase is aborted.
pub const MAX_FAILED_UPDATES: usize = 3;

/// Campaign default for the control-ordinate floor, in chord units. Drag
/// falls monotonically with thickness, so without a floor the optimum is the
/// zero-thickness corner of the design box and clipped actions keep landing
/// on invalid flat plates.
pub const DEFAULT_ORDINATE_FLOOR: f64 = 0.03;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MFLIGHT_THREADS";

const STREAM_INIT: u64 = 0;
const STREAM_EVAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Scratch,
    SingleFidelityCtl,
    MultiFidelityCtl,
}

impl Mode {
    pub fn uses_transfer(self) -> bool {
        self != Mode::Scratch
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Scratch => "scratch",
            Mode::SingleFidelityCtl => "single_fidelity_ctl",
            Mode::MultiFidelityCtl => "multi_fidelity_ctl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Source,
    Target,
}

impl PhaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseName::Source => "source",
            PhaseName::Target => "target",
        }
    }

    fn stream(self) -> u64 {
        match self {
            PhaseName::Source => 1,
            PhaseName::Target => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub fidelity: Fidelity,
    pub mu: f64,
    pub sigma: f64,
    pub max_episodes: usize,
}

impl PhaseConfig {
    pub fn distribution(&self) -> StateDistribution {
        StateDistribution { mu: self.mu, sigma: self.sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub alpha_deg: f64,
    pub low_panels: usize,
    pub high_panels: usize,
    pub penalty: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            alpha_deg: 0.0,
            low_panels: LowFidelity::<f64>::DEFAULT_PANELS,
            high_panels: HighFidelity::<f64>::DEFAULT_PANELS,
            penalty: DEFAULT_PENALTY,
        }
    }
}

/// Affine state scaling `(re_c − mu) / sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateReference {
    pub mu: f64,
    pub sigma: f64,
}

pub fn normalize_state(re_c: f64, reference: StateReference) -> f64 {
    (re_c - reference.mu) / reference.sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub trailing_window: usize,
    /// Fixed episodes-to-threshold level; unset means "derive it from a
    /// scratch run" (done by the comparison tooling).
    pub threshold: Option<f64>,
    pub last_n: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { trailing_window: 50, threshold: None, last_n: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub workers: usize,
    pub episodes_per_round: usize,
    /// Transfer even if the source budget runs out before the controller
    /// declares completion.
    pub force_transfer: bool,
    /// Source phase. In scratch mode it only supplies the default state
    /// reference, so scratch and transfer runs see the same coordinates.
    pub source: PhaseConfig,
    pub target: PhaseConfig,
    /// Defaults to the source distribution.
    pub reference: Option<StateReference>,
    pub env: EnvConfig,
    pub geometry: GeometryBounds<f64>,
    pub network: NetworkConfig,
    pub ppo: PpoConfig,
    pub ctl: CtlConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode: Mode::SingleFidelityCtl,
            seed: 0,
            workers: 4,
            episodes_per_round: 20,
            force_transfer: false,
            source: PhaseConfig { fidelity: Fidelity::Low, mu: 5.5e6, sigma: 5e5, max_episodes: 5000 },
            target: PhaseConfig { fidelity: Fidelity::Low, mu: 8e6, sigma: 5e5, max_episodes: 5000 },
            reference: None,
            env: EnvConfig::default(),
            geometry: GeometryBounds::with_ordinate_floor(DEFAULT_ORDINATE_FLOOR),
            network: NetworkConfig::default(),
            ppo: PpoConfig::default(),
            ctl: CtlConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("worker {worker} panicked: {message}")]
    WorkerPanic { worker: usize, message: String },
    #[error("{phase} phase aborted after {failures} consecutive discarded updates (episode {episode})")]
    Aborted { phase: &'static str, episode: usize, failures: usize },
    #[error("source phase used its {0} episodes without the controller completing")]
    SourceIncomplete(usize),
    #[error("controller rejected a reward: {0}")]
    Controller(String),
}

impl RunConfig {
    pub fn reference(&self) -> StateReference {
        self.reference.unwrap_or(StateReference { mu: self.source.mu, sigma: self.source.sigma })
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let err = |m: String| Err(OrchestratorError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.workers == 0 || self.episodes_per_round == 0 {
            return err("workers and episodes_per_round must be >= 1".into());
        }
        if self.episodes_per_round % self.workers != 0 {
            return err(format!(
                "episodes_per_round ({}) must be divisible by workers ({})",
                self.episodes_per_round, self.workers
            ));
        }
        let phases: &[(&str, &PhaseConfig)] = if self.mode.uses_transfer() {
            &[("source", &self.source), ("target", &self.target)]
        } else {
            &[("target", &self.target)]
        };
        for (name, p) in phases {
            if p.max_episodes == 0 || p.max_episodes % self.episodes_per_round != 0 {
                return err(format!(
                    "{name}.max_episodes ({}) must be a positive multiple of episodes_per_round ({})",
                    p.max_episodes, self.episodes_per_round
                ));
            }
        }
        for (name, p) in [("source", &self.source), ("target", &self.target)] {
            p.distribution().validate().map_err(|e| OrchestratorError::Config(format!("{name}: {e}")))?;
        }
        match self.mode {
            Mode::SingleFidelityCtl if self.source.fidelity != self.target.fidelity => {
                return err("single_fidelity_ctl needs source and target on the same fidelity".into());
            }
            Mode::MultiFidelityCtl if (self.source.fidelity, self.target.fidelity) != (Fidelity::Low, Fidelity::High) => {
                return err("multi_fidelity_ctl needs a low-fidelity source and a high-fidelity target".into());
            }
            _ => {}
        }
        let r = self.reference();
        if !(r.sigma > 0.0 && r.sigma.is_finite() && r.mu.is_finite()) {
            return err("reference.sigma must be positive and finite".into());
        }
        if !self.env.alpha_deg.is_finite() || !self.env.penalty.is_finite() {
            return err("env.alpha_deg and env.penalty must be finite".into());
        }
        if self.env.low_panels < 40 || self.env.high_panels < 40 || self.env.low_panels % 2 + self.env.high_panels % 2 != 0 {
            return err("panel counts must be even and >= 40".into());
        }
        if self.metrics.trailing_window == 0 || self.metrics.last_n == 0 {
            return err("metrics windows must be >= 1".into());
        }
        self.geometry.validate().map_err(|e| OrchestratorError::Config(format!("geometry: {e}")))?;
        self.network.validate().map_err(OrchestratorError::Config)?;
        if self.network.action_dim != DESIGN_DIM {
            return err(format!("network.action_dim must be {DESIGN_DIM}"));
        }
        self.ppo.validate().map_err(OrchestratorError::Config)?;
        self.ctl.validate().map_err(OrchestratorError::Config)?;
        Ok(())
    }
}

/// The two flow models of a campaign, each with its own call counter.
#[derive(Debug)]
pub struct Environments {
    pub low: LowFidelity<f64>,
    pub high: HighFidelity<f64>,
}

impl Environments {
    pub fn new(cfg: &EnvConfig) -> Self {
        let alpha = cfg.alpha_deg.to_radians();
        Self { low: LowFidelity::new(alpha, cfg.low_panels), high: HighFidelity::new(alpha, cfg.high_panels) }
    }

    pub fn get(&self, fidelity: Fidelity) -> &dyn Environment<f64> {
        match fidelity {
            Fidelity::Low => &self.low,
            Fidelity::High => &self.high,
        }
    }
}

/// One finished episode before it is pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// 0-based index within the phase.
    pub index: usize,
    pub worker: usize,
    pub re_c: f64,
    pub status: EpisodeStatus,
    pub record: EpisodeRecord<f64>,
}

fn run_episode(
    cfg: &RunConfig,
    env: &dyn Environment<f64>,
    dist: &StateDistribution,
    params: &PolicyParams<f64>,
    phase: PhaseName,
    index: usize,
    worker: usize,
) -> Episode {
    let mut rng = stream_rng(cfg.seed, phase.stream(), index as u64);
    let re_c: f64 = dist.sample(&mut rng);
    let state = normalize_state(re_c, cfg.reference());
    let act = params.act(state, &mut rng);
    let value = params.value(state);
    let (reward, info) = match DesignVector::from_slice(&act.clipped_action) {
        Ok(design) => step(env, &cfg.geometry, &design, re_c, cfg.env.penalty),
        Err(_) => {
            env.counter().bump();
            (cfg.env.penalty, crate::aeroenv::StepInfo { status: EpisodeStatus::InvalidShape, cd: None, cl: None })
        }
    };
    Episode {
        index,
        worker,
        re_c,
        status: info.status,
        record: EpisodeRecord::single_step(state, act.action, act.log_prob, reward, value),
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Thread count for `workers`, capped by `MFLIGHT_THREADS` when set.
pub fn thread_count(workers: usize) -> usize {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    cap.map_or(workers, |c| workers.min(c)).max(1)
}

/// Runs one round of `cfg.episodes_per_round` episodes starting at phase
/// index `first`, returning them in episode order.
#[allow(clippy::too_many_arguments)]
pub fn collect_round(
    pool: &rayon::ThreadPool,
    cfg: &RunConfig,
    env: &dyn Environment<f64>,
    dist: &StateDistribution,
    params: &PolicyParams<f64>,
    phase: PhaseName,
    first: usize,
    count: usize,
) -> Result<Vec<Episode>, OrchestratorError> {
    let workers = cfg.workers.min(count.max(1));
    let per_worker = count.div_ceil(workers);
    let chunks: Vec<Result<Vec<Episode>, OrchestratorError>> = pool.install(|| {
        (0..workers)
            .into_par_iter()
            .map(|w| {
                let lo = first + w * per_worker;
                let hi = (lo + per_worker).min(first + count);
                catch_unwind(AssertUnwindSafe(|| {
                    (lo..hi).map(|i| run_episode(cfg, env, dist, params, phase, i, w)).collect::<Vec<_>>()
                }))
                .map_err(|p| OrchestratorError::WorkerPanic { worker: w, message: panic_message(p) })
            })
            .collect()
    });
    let mut out = Vec::with_capacity(count);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// 1-based, counted across the whole campaign.
    pub episode: usize,
    pub phase: PhaseName,
    pub fidelity: Fidelity,
    pub worker: usize,
    pub re_c: f64,
    pub reward: f64,
    pub beta: Option<f64>,
    /// Clip fraction of the update that consumed this episode; NaN if that
    /// update was discarded.
    pub clip_fraction: f64,
    pub status: EpisodeStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateLog {
    pub phase: PhaseName,
    pub round: usize,
    /// Campaign episode number of the last episode in the round.
    pub last_episode: usize,
    /// `None` when the update was discarded.
    pub stats: Option<UpdateStats<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLog {
    pub name: PhaseName,
    pub fidelity: Fidelity,
    pub episodes: Vec<EpisodeLog>,
    pub updates: Vec<UpdateLog>,
    /// Phase episode at which the controller completed.
    pub completed_at: Option<usize>,
}

impl PhaseLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }
}

/// Mutable training state carried through a phase.
pub struct Agent {
    pub params: PolicyParams<f64>,
    pub opt: Adam<f64>,
}

impl Agent {
    pub fn new(params: PolicyParams<f64>) -> Self {
        let n = params.param_count();
        Self { params, opt: Adam::new(n) }
    }
}

/// Trains `agent` on one phase. `offset` is the number of campaign episodes
/// already logged. With a controller the phase ends at the first round
/// boundary after completion.
#[allow(clippy::too_many_arguments)]
pub fn run_phase(
    pool: &rayon::ThreadPool,
    cfg: &RunConfig,
    name: PhaseName,
    phase: &PhaseConfig,
    env: &dyn Environment<f64>,
    agent: &mut Agent,
    mut controller: Option<&mut TransferController<f64>>,
    offset: usize,
) -> Result<PhaseLog, OrchestratorError> {
    let dist = phase.distribution();
    let mut log =
        PhaseLog { name, fidelity: phase.fidelity, episodes: Vec::new(), updates: Vec::new(), completed_at: None };
    let mut failures = 0;
    let mut round = 0;
    while log.episodes.len() < phase.max_episodes {
        let first = log.episodes.len();
        let count = cfg.episodes_per_round.min(phase.max_episodes - first);
        let batch = collect_round(pool, cfg, env, &dist, &agent.params, name, first, count)?;
        let records: Vec<_> = batch.iter().map(|e| e.record.clone()).collect();
        let stats = match ppo::update(&mut agent.params, &mut agent.opt, &ExperienceBatch::new(records), &cfg.ppo) {
            Ok(s) => {
                failures = 0;
                Some(s)
            }
            Err(e @ (PpoError::NonFiniteGradient { .. } | PpoError::NonFiniteRecord(_))) => {
                failures += 1;
                log::warn!("{} round {round}: {e}", name.as_str());
                if failures >= MAX_FAILED_UPDATES {
                    return Err(OrchestratorError::Aborted {
                        phase: name.as_str(),
                        episode: offset + first + count,
                        failures,
                    });
                }
                None
            }
            Err(PpoError::EmptyBatch) => unreachable!("rounds always hold at least one episode"),
        };
        let clip_fraction = stats.as_ref().map_or(f64::NAN, |s| s.clip_fraction);
        for ep in batch {
            let beta = match controller.as_deref_mut() {
                Some(c) => Some(c.update(ep.record.reward).map_err(|e| OrchestratorError::Controller(e.to_string()))?),
                None => None,
            };
            log.episodes.push(EpisodeLog {
                episode: offset + ep.index + 1,
                phase: name,
                fidelity: phase.fidelity,
                worker: ep.worker,
                re_c: ep.re_c,
                reward: ep.record.reward,
                beta,
                clip_fraction,
                status: ep.status,
            });
        }
        log.updates.push(UpdateLog { phase: name, round, last_episode: offset + log.episodes.len(), stats });
        round += 1;
        if let Some(c) = controller.as_deref() {
            if let Some(e) = c.completed_at() {
                log.completed_at = Some(e);
                log::info!("{} phase complete at episode {e}", name.as_str());
                break;
            }
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub threshold: Option<f64>,
    pub episodes_to_threshold: Option<usize>,
    pub final_trailing_mean: f64,
    pub tail: TailStats,
}

impl TargetMetrics {
    pub fn compute(rewards: &[f64], cfg: &MetricsConfig, threshold: Option<f64>) -> Self {
        let k = cfg.trailing_window;
        Self {
            threshold,
            episodes_to_threshold: threshold.and_then(|t| episodes_to_threshold(rewards, k, t)),
            final_trailing_mean: trailing_means(rewards, k).last().copied().unwrap_or(f64::NAN),
            tail: tail_stats(rewards, cfg.last_n),
        }
    }

    /// Threshold a transfer run would be measured against if this were the
    /// scratch reference.
    pub fn reference_threshold(&self) -> f64 {
        default_threshold(self.final_trailing_mean)
    }
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub config: RunConfig,
    pub source: Option<PhaseLog>,
    pub target: PhaseLog,
    /// Networks and controller at the end of the source phase.
    pub source_checkpoint: Option<Checkpoint<f64>>,
    /// Networks at the start of the target phase.
    pub target_initial: PolicyParams<f64>,
    pub final_checkpoint: Checkpoint<f64>,
    pub low_calls: u64,
    pub high_calls: u64,
    pub high_calls_during_source: u64,
    pub target_metrics: TargetMetrics,
}

impl CampaignReport {
    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeLog> {
        self.source.iter().flat_map(|p| &p.episodes).chain(&self.target.episodes)
    }

    pub fn updates(&self) -> impl Iterator<Item = &UpdateLog> {
        self.source.iter().flat_map(|p| &p.updates).chain(&self.target.updates)
    }

    /// High-fidelity episodes spent before the target threshold was reached;
    /// the full high-fidelity count if it never was.
    pub fn high_fidelity_cost(&self) -> u64 {
        let target_hi = match (self.target.fidelity, self.target_metrics.episodes_to_threshold) {
            (Fidelity::High, Some(e)) => e as u64,
            (Fidelity::High, None) => self.target.episodes.len() as u64,
            (Fidelity::Low, _) => 0,
        };
        self.high_calls_during_source + target_hi
    }
}

pub fn initial_params(cfg: &RunConfig) -> PolicyParams<f64> {
    PolicyParams::new(&cfg.network, &mut stream_rng(cfg.seed, STREAM_INIT, 0))
}

pub fn build_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(workers))
        .thread_name(|i| format!("mflight-worker-{i}"))
        .build()
        .expect("thread pool construction")
}

pub fn run_campaign(cfg: &RunConfig) -> Result<CampaignReport, OrchestratorError> {
    cfg.validate()?;
    let envs = Environments::new(&cfg.env);
    let pool = build_pool(cfg.workers);
    let mut agent = Agent::new(initial_params(cfg));
    let mut source = None;
    let mut source_checkpoint = None;
    if cfg.mode.uses_transfer() {
        let mut ctl = TransferController::new(&cfg.ctl);
        let env = envs.get(cfg.source.fidelity);
        let log = run_phase(&pool, cfg, PhaseName::Source, &cfg.source, env, &mut agent, Some(&mut ctl), 0)?;
        if log.completed_at.is_none() {
            if !cfg.force_transfer {
                return Err(OrchestratorError::SourceIncomplete(log.episodes.len()));
            }
            log::warn!("source phase incomplete after {} episodes; transferring anyway", log.episodes.len());
        }
        source_checkpoint = Some(Checkpoint { params: agent.params.clone(), controller: Some(ctl) });
        agent = Agent::new(transfer(&agent.params));
        source = Some(log);
    }
    let high_calls_during_source = envs.high.episodes();
    let target_initial = agent.params.clone();
    let offset = source.as_ref().map_or(0, |s: &PhaseLog| s.episodes.len());
    let env = envs.get(cfg.target.fidelity);
    let target = run_phase(&pool, cfg, PhaseName::Target, &cfg.target, env, &mut agent, None, offset)?;
    let target_metrics = TargetMetrics::compute(&target.rewards(), &cfg.metrics, cfg.metrics.threshold);
    Ok(CampaignReport {
        config: cfg.clone(),
        source,
        target,
        source_checkpoint,
        target_initial,
        final_checkpoint: Checkpoint { params: agent.params, controller: None },
        low_calls: envs.low.episodes(),
        high_calls: envs.high.episodes(),
        high_calls_during_source,
        target_metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// `bins` equal-width bins spanning the data; one bin if all values agree.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![HistogramBin { lo, hi, count: values.len() }];
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// Greedy design at `re_c` and its evaluation on `env`.
#[derive(Debug, Clone)]
pub struct PredictedShape {
    pub re_c: f64,
    pub design: Vec<f64>,
    pub shape: Option<AirfoilShape<f64>>,
    pub result: Option<AeroResult<f64>>,
}

impl PredictedShape {
    /// Drag of a converged evaluation.
    pub fn cd(&self) -> Option<f64> {
        self.result.as_ref().filter(|r| r.converged && r.cd.is_finite()).map(|r| r.cd)
    }
}

pub fn predict_shape(
    params: &PolicyParams<f64>,
    cfg: &RunConfig,
    env: &dyn Environment<f64>,
    re_c: f64,
) -> PredictedShape {
    let design = params.greedy_action(normalize_state(re_c, cfg.reference()));
    let shape = DesignVector::from_slice(&design)
        .ok()
        .and_then(|d| build_design(&d, &cfg.geometry, env.panels()).ok())
        .filter(|s| s.is_valid());
    let result = shape.as_ref().and_then(|s| env.evaluate(s, re_c).ok());
    PredictedShape { re_c, design, shape, result }
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rewards: Vec<f64>,
    pub stats: TailStats,
    pub histogram: Vec<HistogramBin>,
    /// Shape proposed at the distribution mean; absent for zero episodes.
    pub mean_shape: Option<PredictedShape>,
}

/// Greedy rollouts of `params` on `dist`; nothing is learned.
pub fn evaluate_policy(
    params: &PolicyParams<f64>,
    cfg: &RunConfig,
    dist: &StateDistribution,
    env: &dyn Environment<f64>,
    n_episodes: usize,
) -> Evaluation {
    let rewards: Vec<f64> = (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, STREAM_EVAL, i as u64);
            let re_c: f64 = dist.sample(&mut rng);
            let action = params.greedy_action(normalize_state(re_c, cfg.reference()));
            match DesignVector::from_slice(&action) {
                Ok(d) => step(env, &cfg.geometry, &d, re_c, cfg.env.penalty).0,
                Err(_) => cfg.env.penalty,
            }
        })
        .collect();
    Evaluation {
        stats: tail_stats(&rewards, rewards.len()),
        histogram: histogram(&rewards, HISTOGRAM_BINS),
        mean_shape: (n_episodes > 0).then(|| predict_shape(params, cfg, env, dist.mu)),
        rewards,
    }
}
