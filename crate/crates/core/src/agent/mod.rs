//! Gaussian policy and value networks.
//!
//! The policy maps the normalized Reynolds number to the mean of a diagonal
//! Gaussian over the design vector; the standard deviation is a learned,
//! state-independent vector. Gradients are exact, accumulated into flat
//! buffers laid out like [`PolicyParams::to_flat`].

pub mod mlp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::DESIGN_DIM;
use crate::rng::standard_normal;
use crate::scalar::Real;
pub use mlp::{Layer, Mlp, Trace};

/// Observation width: the normalized chord Reynolds number.
pub const STATE_DIM: usize = 1;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub action_dim: usize,
    pub log_std_init: f64,
    pub hidden_gain: f64,
    pub output_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], action_dim: DESIGN_DIM, log_std_init: -0.5, hidden_gain: 1.0, output_gain: 0.01 }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.action_dim == 0 {
            return Err("network.action_dim must be >= 1".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("network.hidden widths must be >= 1".into());
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std_init) {
            return Err(format!("network.log_std_init must lie in [{LOG_STD_MIN}, {LOG_STD_MAX}]"));
        }
        if !(self.hidden_gain.is_finite() && self.output_gain.is_finite()) {
            return Err("network gains must be finite".into());
        }
        Ok(())
    }

    fn sizes(&self, outputs: usize) -> Vec<usize> {
        let mut s = vec![STATE_DIM];
        s.extend(&self.hidden);
        s.push(outputs);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T> {
    pub policy: Mlp<T>,
    pub log_std: Vec<T>,
    pub value: Mlp<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAction<T> {
    /// Pre-clip sample.
    pub action: Vec<T>,
    pub log_prob: T,
    /// `action` clamped to `[-1, 1]`.
    pub clipped_action: Vec<T>,
}

fn half_ln_two_pi<T: Real>() -> T {
    T::lit(0.5 * std::f64::consts::TAU.ln())
}

pub fn clip_unit<T: Real>(a: &[T]) -> Vec<T> {
    a.iter().map(|&v| v.max(-T::one()).min(T::one())).collect()
}

impl<T: Real> PolicyParams<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Self {
        Self {
            policy: Mlp::orthogonal(&cfg.sizes(cfg.action_dim), cfg.hidden_gain, cfg.output_gain, rng),
            log_std: vec![T::lit(cfg.log_std_init); cfg.action_dim],
            value: Mlp::orthogonal(&cfg.sizes(1), cfg.hidden_gain, cfg.output_gain, rng),
        }
    }

    /// All-zero networks, `log_std` set to `log_std_init`.
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        Self {
            policy: Mlp::zeros(&cfg.sizes(cfg.action_dim)),
            log_std: vec![T::lit(cfg.log_std_init); cfg.action_dim],
            value: Mlp::zeros(&cfg.sizes(1)),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn param_count(&self) -> usize {
        self.policy.param_count() + self.log_std.len() + self.value.param_count()
    }

    pub fn log_std_offset(&self) -> usize {
        self.policy.param_count()
    }

    pub fn value_offset(&self) -> usize {
        self.policy.param_count() + self.log_std.len()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.policy.write_flat(&mut out);
        out.extend_from_slice(&self.log_std);
        self.value.write_flat(&mut out);
        out
    }

    /// Loads every parameter from `flat` and re-applies the `log_std` clamp.
    pub fn set_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length mismatch");
        let off = self.policy.read_flat(flat);
        let n = self.log_std.len();
        self.log_std.copy_from_slice(&flat[off..off + n]);
        self.value.read_flat(&flat[off + n..]);
        self.clamp_log_std();
    }

    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        self.log_std.iter_mut().for_each(|v| *v = v.max(lo).min(hi));
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }

    pub fn forward_policy(&self, state: T) -> (Vec<T>, Vec<T>) {
        (self.policy.forward(&[state]), self.std())
    }

    pub fn std(&self) -> Vec<T> {
        self.log_std.iter().map(|v| v.exp()).collect()
    }

    pub fn act<R: Rng + ?Sized>(&self, state: T, rng: &mut R) -> GaussianAction<T> {
        let (mean, std) = self.forward_policy(state);
        let action: Vec<T> =
            mean.iter().zip(&std).map(|(&m, &s)| m + s * T::lit(standard_normal(rng))).collect();
        let log_prob = self.log_density(&mean, &action);
        GaussianAction { clipped_action: clip_unit(&action), action, log_prob }
    }

    /// Policy mean clamped to the action box.
    pub fn greedy_action(&self, state: T) -> Vec<T> {
        clip_unit(&self.policy.forward(&[state]))
    }

    pub fn log_prob(&self, state: T, action: &[T]) -> T {
        self.log_density(&self.policy.forward(&[state]), action)
    }

    fn log_density(&self, mean: &[T], action: &[T]) -> T {
        let half = T::lit(0.5);
        mean.iter().zip(action).zip(&self.log_std).fold(T::zero(), |acc, ((&m, &a), &ls)| {
            let z = (a - m) / ls.exp();
            acc - half * z * z - ls - half_ln_two_pi()
        })
    }

    /// Differential entropy of the action distribution (state independent).
    pub fn entropy(&self) -> T {
        let c = half_ln_two_pi::<T>() + T::lit(0.5);
        self.log_std.iter().fold(T::zero(), |acc, &ls| acc + ls + c)
    }

    pub fn value(&self, state: T) -> T {
        self.value.forward(&[state])[0]
    }

    /// Adds `scale · ∇ log π(action | state)` to `grad`; returns the log-probability.
    pub fn accumulate_log_prob_grad(&self, state: T, action: &[T], scale: T, grad: &mut [T]) -> T {
        let trace = self.policy.forward_traced(&[state]);
        let mean = trace.output();
        let mut d_mean = Vec::with_capacity(mean.len());
        let ls_off = self.log_std_offset();
        for (i, ((&m, &a), &ls)) in mean.iter().zip(action).zip(&self.log_std).enumerate() {
            let inv_var = (-(ls + ls)).exp();
            let diff = a - m;
            d_mean.push(scale * diff * inv_var);
            grad[ls_off + i] = grad[ls_off + i] + scale * (diff * diff * inv_var - T::one());
        }
        self.policy.backward(&trace, &d_mean, &mut grad[..ls_off]);
        self.log_density(mean, action)
    }

    /// Adds `scale · ∇ V(state)` to `grad`; returns `V(state)`.
    pub fn accumulate_value_grad(&self, state: T, scale: T, grad: &mut [T]) -> T {
        let trace = self.value.forward_traced(&[state]);
        let off = self.value_offset();
        self.value.backward(&trace, &[scale], &mut grad[off..]);
        trace.output()[0]
    }

    /// Adds `scale · ∇ entropy` to `grad`.
    pub fn accumulate_entropy_grad(&self, scale: T, grad: &mut [T]) {
        let off = self.log_std_offset();
        for g in &mut grad[off..off + self.log_std.len()] {
            *g = *g + scale;
        }
    }
}

/// Discounted returns `G_t = Σ_{k≥t} γ^{k−t} r_k`.
pub fn compute_return<T: Real>(rewards: &[T], gamma: T) -> Vec<T> {
    let mut out = vec![T::zero(); rewards.len()];
    let mut acc = T::zero();
    for (g, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    out
}

/// One-step advantage: the reward minus the value baseline.
pub fn advantage<T: Real>(reward: T, value_estimate: T) -> T {
    reward - value_estimate
}

/// Shifts and scales `adv` in place to zero mean and unit population variance.
///
/// A batch with (near) zero spread is only centred.
pub fn normalize_advantages<T: Real>(adv: &mut [T]) {
    if adv.is_empty() {
        return;
    }
    let n = T::lit(adv.len() as f64);
    let mean = adv.iter().copied().sum::<T>() / n;
    let var = adv.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
    let std = var.sqrt();
    let scale = if std > T::lit(1e-12) { std.recip() } else { T::one() };
    adv.iter_mut().for_each(|a| *a = (*a - mean) * scale);
}
