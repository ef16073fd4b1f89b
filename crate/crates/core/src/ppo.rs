//! Proximal policy optimization with a clipped surrogate objective.

use serde::{Deserialize, Serialize};

use crate::agent::{normalize_advantages, PolicyParams};
use crate::scalar::Real;

pub const MAX_RATIO: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub max_grad_norm: f64,
    /// Discount factor; inert for single-step episodes.
    pub gamma: f64,
    /// Stop the epoch loop once the mean KL estimate exceeds this.
    pub target_kl: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            epochs_per_update: 10,
            entropy_coeff: 0.0,
            value_coeff: 0.5,
            max_grad_norm: 0.5,
            gamma: 0.99,
            target_kl: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        let checks: [(bool, &str); 8] = [
            (self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0, "ppo.clip_epsilon must lie in (0, 1)"),
            (self.learning_rate >= 0.0 && self.learning_rate.is_finite(), "ppo.learning_rate must be finite and >= 0"),
            (self.epochs_per_update >= 1, "ppo.epochs_per_update must be >= 1"),
            (self.value_coeff >= 0.0 && self.entropy_coeff.is_finite(), "ppo.value_coeff must be >= 0"),
            (self.max_grad_norm > 0.0, "ppo.max_grad_norm must be > 0"),
            ((0.0..=1.0).contains(&self.gamma), "ppo.gamma must lie in [0, 1]"),
            (self.target_kl > 0.0, "ppo.target_kl must be > 0"),
            (
                (0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2) && self.adam_eps > 0.0,
                "ppo adam parameters must satisfy 0 <= beta < 1, eps > 0",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err((*msg).to_string()),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpoError {
    #[error("experience batch is empty")]
    EmptyBatch,
    #[error("non-finite value in experience batch at record {0}")]
    NonFiniteRecord(usize),
    #[error("non-finite gradient in epoch {epoch}; parameters restored")]
    NonFiniteGradient { epoch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord<T> {
    pub state: T,
    /// Pre-clip action.
    pub action: Vec<T>,
    pub log_prob_old: T,
    pub reward: T,
    pub value_old: T,
    pub advantage: T,
    pub ret: T,
}

impl<T: Real> EpisodeRecord<T> {
    /// Single-step episode: the return is the reward and the advantage its
    /// excess over the baseline.
    pub fn single_step(state: T, action: Vec<T>, log_prob_old: T, reward: T, value_old: T) -> Self {
        Self { state, action, log_prob_old, reward, value_old, advantage: reward - value_old, ret: reward }
    }

    fn is_finite(&self) -> bool {
        [self.state, self.log_prob_old, self.reward, self.value_old, self.advantage, self.ret]
            .iter()
            .chain(&self.action)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperienceBatch<T> {
    pub records: Vec<EpisodeRecord<T>>,
}

impl<T: Real> ExperienceBatch<T> {
    /// Wraps `records` and normalizes their advantages across the batch.
    pub fn new(mut records: Vec<EpisodeRecord<T>>) -> Self {
        let mut adv: Vec<T> = records.iter().map(|r| r.advantage).collect();
        normalize_advantages(&mut adv);
        for (r, a) in records.iter_mut().zip(adv) {
            r.advantage = a;
        }
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check(&self) -> Result<(), PpoError> {
        if self.records.is_empty() {
            return Err(PpoError::EmptyBatch);
        }
        match self.records.iter().position(|r| !r.is_finite()) {
            Some(i) => Err(PpoError::NonFiniteRecord(i)),
            None => Ok(()),
        }
    }
}

/// `exp(new − old)`, capped at [`MAX_RATIO`]. The flag reports whether the cap applied.
pub fn prob_ratio<T: Real>(log_prob_new: T, log_prob_old: T) -> (T, bool) {
    let r = (log_prob_new - log_prob_old).exp();
    let cap = T::lit(MAX_RATIO);
    if r > cap || r.is_nan() {
        log::debug!("probability ratio {r} capped at {MAX_RATIO:e}");
        (cap, true)
    } else {
        (r, false)
    }
}

/// Per-sample clipped objective `min(r A, clip(r, 1−ε, 1+ε) A)` and its
/// derivative with respect to `r`. Ties take the unclipped branch.
pub fn clipped_objective<T: Real>(ratio: T, adv: T, eps: T) -> (T, T) {
    let clipped = ratio.max(T::one() - eps).min(T::one() + eps);
    let unclipped_term = ratio * adv;
    let clipped_term = clipped * adv;
    if unclipped_term <= clipped_term {
        (unclipped_term, adv)
    } else {
        (clipped_term, T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateLoss<T> {
    pub total: T,
    pub policy: T,
    pub value: T,
    pub entropy: T,
    pub mean_ratio: T,
    pub clip_fraction: T,
    /// Mean of `(r − 1) − ln r`, a non-negative estimate of KL(old ‖ new).
    pub kl: T,
}

/// Loss `−mean[min(rA, clip(r)A)] + c_v·mean[(V − G)²] − c_e·entropy` and its gradient.
pub fn clipped_surrogate<T: Real>(
    batch: &ExperienceBatch<T>,
    params: &PolicyParams<T>,
    cfg: &PpoConfig,
) -> Result<(SurrogateLoss<T>, Vec<T>), PpoError> {
    batch.check()?;
    let n = T::lit(batch.len() as f64);
    let eps = T::lit(cfg.clip_epsilon);
    let c_v = T::lit(cfg.value_coeff);
    let c_e = T::lit(cfg.entropy_coeff);
    let mut grad = vec![T::zero(); params.param_count()];
    let mut out = SurrogateLoss::default();
    let mut clipped = 0usize;
    for rec in &batch.records {
        let log_prob = params.log_prob(rec.state, &rec.action);
        let (ratio, capped) = prob_ratio(log_prob, rec.log_prob_old);
        let (obj, d_ratio) = clipped_objective(ratio, rec.advantage, eps);
        out.policy = out.policy - obj / n;
        out.mean_ratio = out.mean_ratio + ratio / n;
        out.kl = out.kl + (ratio - T::one() - ratio.ln()) / n;
        if (ratio - T::one()).abs() > eps {
            clipped += 1;
        }
        // d(−obj/n)/dθ = −(d obj/dr)·r·∇log π / n; a capped ratio is flat
        if !capped && d_ratio != T::zero() {
            params.accumulate_log_prob_grad(rec.state, &rec.action, -d_ratio * ratio / n, &mut grad);
        }
        let v = params.value(rec.state);
        let err = v - rec.ret;
        out.value = out.value + err * err / n;
        params.accumulate_value_grad(rec.state, T::lit(2.0) * c_v * err / n, &mut grad);
    }
    out.entropy = params.entropy();
    if c_e != T::zero() {
        params.accumulate_entropy_grad(-c_e, &mut grad);
    }
    out.clip_fraction = T::lit(clipped as f64) / n;
    out.total = out.policy + c_v * out.value - c_e * out.entropy;
    Ok((out, grad))
}

/// Adaptive-moment optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.m.len());
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [T], grad: &[T], cfg: &PpoConfig) {
        self.steps += 1;
        let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.adam_eps);
        let t = self.steps as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm<T: Real>(grad: &mut [T], max_norm: T) -> T {
    let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g = *g * s);
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats<T> {
    pub epochs: usize,
    pub mean_ratio: T,
    pub clip_fraction: T,
    pub value_loss: T,
    pub entropy: T,
    pub kl: T,
    pub grad_norm: T,
    pub early_stopped: bool,
}

/// Runs up to `epochs_per_update` full-batch steps. Statistics describe the
/// last evaluated epoch. On a non-finite gradient the parameters and
/// optimizer state are restored and an error returned.
pub fn update<T: Real>(
    params: &mut PolicyParams<T>,
    opt: &mut Adam<T>,
    batch: &ExperienceBatch<T>,
    cfg: &PpoConfig,
) -> Result<UpdateStats<T>, PpoError> {
    batch.check()?;
    let saved = (params.clone(), opt.clone());
    let mut stats = UpdateStats::default();
    let max_norm = T::lit(cfg.max_grad_norm);
    for epoch in 0..cfg.epochs_per_update {
        let (loss, mut grad) = clipped_surrogate(batch, params, cfg)?;
        stats = UpdateStats {
            epochs: epoch,
            mean_ratio: loss.mean_ratio,
            clip_fraction: loss.clip_fraction,
            value_loss: loss.value,
            entropy: loss.entropy,
            kl: loss.kl,
            grad_norm: stats.grad_norm,
            early_stopped: false,
        };
        if loss.kl > T::lit(cfg.target_kl) {
            stats.early_stopped = true;
            break;
        }
        if grad.iter().any(|g| !g.is_finite()) || !loss.total.is_finite() {
            (*params, *opt) = saved;
            log::warn!("non-finite gradient in epoch {epoch}; update discarded");
            return Err(PpoError::NonFiniteGradient { epoch });
        }
        stats.grad_norm = clip_grad_norm(&mut grad, max_norm);
        if cfg.learning_rate == 0.0 {
            stats.epochs = epoch + 1;
            continue;
        }
        let mut flat = params.to_flat();
        opt.step(&mut flat, &grad, cfg);
        params.set_flat(&flat);
        stats.epochs = epoch + 1;
        if !params.is_finite() {
            (*params, *opt) = saved;
            log::warn!("parameters became non-finite in epoch {epoch}; update discarded");
            return Err(PpoError::NonFiniteGradient { epoch });
        }
    }
    Ok(stats)
}

/// Bandit sanity task: one constant state, one action dimension, reward
/// `−(clip(a) − target)²`. Returns the policy mean after `updates` rounds of
/// `batch` episodes each.
pub fn quadratic_toy(seed: u64, updates: usize, batch: usize, target: f64, cfg: &PpoConfig) -> f64 {
    use crate::agent::NetworkConfig;
    use crate::rng::stream_rng;

    let net = NetworkConfig { hidden: vec![16], action_dim: 1, ..NetworkConfig::default() };
    let mut params = PolicyParams::<f64>::new(&net, &mut stream_rng(seed, 0, 0));
    let mut opt = Adam::new(params.param_count());
    for u in 0..updates {
        let mut rng = stream_rng(seed, 1, u as u64);
        let value = params.value(0.0);
        let records = (0..batch)
            .map(|_| {
                let a = params.act(0.0, &mut rng);
                let reward = -(a.clipped_action[0] - target).powi(2);
                EpisodeRecord::single_step(0.0, a.action, a.log_prob, reward, value)
            })
            .collect();
        // a failed update leaves the parameters untouched; keep going
        let _ = update(&mut params, &mut opt, &ExperienceBatch::new(records), cfg);
    }
    params.forward_policy(0.0).0[0]
}
