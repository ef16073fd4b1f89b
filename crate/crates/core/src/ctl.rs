//! Controlled transfer: decides when learning on the source task has settled.
//!
//! After every episode the population variance ξ of the last `k` rewards is
//! compared with the largest ξ seen so far. Their ratio β starts at 1 and
//! falls as rewards settle; the source task is complete once β ≤ Γ with at
//! least `k` episodes observed.
//!
//! Once `k` episodes exist the reference maximum only covers full windows.
//! Variances of the two- or three-reward warm-up windows are noisy enough to
//! inflate the maximum and fire the criterion on rewards that have not
//! settled at all.

use serde::{Deserialize, Serialize};

use crate::agent::PolicyParams;
use crate::scalar::Real;

/// Below this running maximum the history is treated as all-quiet.
pub const DEGENERATE_MAX: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtlConfig {
    pub k: usize,
    pub gamma_cut: f64,
}

impl Default for CtlConfig {
    fn default() -> Self {
        Self { k: 50, gamma_cut: 0.3 }
    }
}

impl CtlConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("ctl.k must be >= 1".into());
        }
        if !(self.gamma_cut > 0.0 && self.gamma_cut < 1.0) {
            return Err(format!("ctl.gamma_cut must lie in (0, 1), got {}", self.gamma_cut));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CtlError {
    #[error("reward {0} is not finite")]
    InvalidReward(f64),
}

/// Population variance of `window`; zero for fewer than two entries.
pub fn window_statistic<T: Real>(window: &[T]) -> T {
    if window.len() < 2 {
        return T::zero();
    }
    // shifting by the first entry makes a constant window exactly zero
    let r0 = window[0];
    let n = T::lit(window.len() as f64);
    let mean = window.iter().map(|&r| r - r0).sum::<T>() / n;
    window.iter().map(|&r| (r - r0 - mean) * (r - r0 - mean)).sum::<T>() / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferController<T> {
    k: usize,
    gamma_cut: T,
    rewards: Vec<T>,
    xi: Vec<T>,
    beta: Vec<T>,
    max_warmup: T,
    max_full: T,
    completed_at: Option<usize>,
}

impl<T: Real> TransferController<T> {
    pub fn new(cfg: &CtlConfig) -> Self {
        Self {
            k: cfg.k.max(1),
            gamma_cut: T::lit(cfg.gamma_cut),
            rewards: Vec::new(),
            xi: Vec::new(),
            beta: Vec::new(),
            max_warmup: T::zero(),
            max_full: T::zero(),
            completed_at: None,
        }
    }

    /// Rebuilds a controller by replaying a reward log.
    pub fn replay(cfg: &CtlConfig, rewards: &[T]) -> Result<Self, CtlError> {
        let mut c = Self::new(cfg);
        for &r in rewards {
            c.update(r)?;
        }
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma_cut(&self) -> T {
        self.gamma_cut
    }

    pub fn episodes(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn xi_history(&self) -> &[T] {
        &self.xi
    }

    pub fn beta_history(&self) -> &[T] {
        &self.beta
    }

    pub fn is_complete(&self) -> bool {
        self.completed_at.is_some()
    }

    /// 1-based episode at which completion was first declared.
    pub fn completed_at(&self) -> Option<usize> {
        self.completed_at
    }

    /// Records one episode reward and returns β for it.
    ///
    /// Updates after completion are recorded but never revert it.
    pub fn update(&mut self, reward: T) -> Result<T, CtlError> {
        if !reward.is_finite() {
            return Err(CtlError::InvalidReward(reward.to_f64_lossy()));
        }
        self.rewards.push(reward);
        let e = self.rewards.len();
        let xi = window_statistic(&self.rewards[e.saturating_sub(self.k)..]);
        let max = if e < self.k {
            self.max_warmup = self.max_warmup.max(xi);
            self.max_warmup
        } else {
            self.max_full = self.max_full.max(xi);
            self.max_full
        };
        let beta = if e == 1 {
            T::one()
        } else if max <= T::lit(DEGENERATE_MAX) {
            T::zero()
        } else {
            xi / max
        };
        self.xi.push(xi);
        self.beta.push(beta);
        if self.completed_at.is_none() && beta <= self.gamma_cut && e >= self.k {
            self.completed_at = Some(e);
        }
        Ok(beta)
    }
}

/// Hands the source agent's networks to the target task.
///
/// Only parameters are copied; the caller starts the target phase with fresh
/// optimizer moments.
pub fn transfer<T: Real>(source: &PolicyParams<T>) -> PolicyParams<T> {
    source.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::NetworkConfig;
    use crate::rng::{standard_normal, stream_rng};
    use proptest::prelude::*;

    #[test]
    fn window_examples() {
        assert_eq!(window_statistic(&[-0.01f64; 50]), 0.0);
        assert_eq!(window_statistic(&[0.0f64, 1.0]), 0.25);
        assert_eq!(window_statistic(&[3.0f64]), 0.0);
    }

    #[test]
    fn first_beta_is_one_and_short_windows_use_all_rewards() {
        let mut c = TransferController::<f64>::new(&CtlConfig::default());
        assert_eq!(c.update(0.3).unwrap(), 1.0);
        c.update(0.7).unwrap();
        c.update(0.2).unwrap();
        assert_eq!(c.xi_history()[2], window_statistic(&[0.3, 0.7, 0.2]));
    }

    #[test]
    fn constant_stream_completes_at_k() {
        let cfg = CtlConfig { k: 50, gamma_cut: 0.3 };
        let mut c = TransferController::<f64>::new(&cfg);
        for e in 1..=60 {
            let b = c.update(-0.01).unwrap();
            if e > 1 {
                assert_eq!(b, 0.0);
            }
            assert_eq!(c.is_complete(), e >= 50);
        }
        assert_eq!(c.completed_at(), Some(50));
    }

    #[test]
    fn non_finite_reward_is_an_error() {
        let mut c = TransferController::<f64>::new(&CtlConfig::default());
        assert_eq!(c.update(f64::INFINITY), Err(CtlError::InvalidReward(f64::INFINITY)));
        assert_eq!(c.episodes(), 0);
    }

    fn scripted(seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 7, 0);
        (0..400).map(|i| if i < 200 { 1.0 } else { 0.01 } * standard_normal(&mut rng)).collect()
    }

    #[test]
    fn variance_plateau_script() {
        let cfg = CtlConfig::default();
        let passed = (0..20)
            .filter(|&seed| {
                let c = TransferController::replay(&cfg, &scripted(seed)).unwrap();
                matches!(c.completed_at(), Some(e) if e > 200 && e < 400)
            })
            .count();
        assert!(passed >= 19, "{passed}/20");
    }

    #[test]
    fn completion_never_reverts() {
        let cfg = CtlConfig::default();
        let mut c = TransferController::new(&cfg);
        let mut rng = stream_rng(3, 0, 0);
        let mut seen = false;
        for i in 0..600 {
            let scale = if i < 100 || i > 300 { 1.0 } else { 1e-3 };
            c.update(scale * standard_normal(&mut rng)).unwrap();
            seen |= c.is_complete();
            assert_eq!(c.is_complete(), seen);
        }
        assert!(seen);
    }

    #[test]
    fn scaling_by_a_power_of_two_is_exact() {
        let cfg = CtlConfig::default();
        let raw = scripted(5);
        let scaled: Vec<f64> = raw.iter().map(|r| 0.5 * r).collect();
        let a = TransferController::replay(&cfg, &raw).unwrap();
        let b = TransferController::replay(&cfg, &scaled).unwrap();
        assert_eq!(a.beta_history(), b.beta_history());
        assert_eq!(a.completed_at(), b.completed_at());
    }

    #[test]
    fn transfer_is_a_deep_copy() {
        let mut rng = stream_rng(1, 0, 0);
        let src = PolicyParams::<f64>::new(&NetworkConfig::default(), &mut rng);
        let mut dst = transfer(&src);
        let mut r1 = stream_rng(9, 0, 0);
        let mut r2 = stream_rng(9, 0, 0);
        assert_eq!(src.act(0.4, &mut r1), dst.act(0.4, &mut r2));
        dst.log_std[0] = 1.0;
        dst.policy.layers[0].weights[0] += 1.0;
        assert_ne!(src, dst);
        assert_eq!(src.log_std[0], -0.5);
    }

    proptest! {
        #[test]
        fn beta_in_unit_interval_and_one_at_running_max(rewards in prop::collection::vec(-1.0..1.0f64, 1..200), k in 2usize..60) {
            let c = TransferController::replay(&CtlConfig { k, gamma_cut: 0.3 }, &rewards).unwrap();
            let mut max = 0.0f64;
            for (e, (&b, &xi)) in c.beta_history().iter().zip(c.xi_history()).enumerate() {
                if e + 1 == k {
                    max = 0.0;
                }
                prop_assert!((0.0..=1.0).contains(&b));
                if xi >= max && xi > DEGENERATE_MAX {
                    prop_assert_eq!(b, 1.0);
                }
                max = max.max(xi);
                if let Some(done) = c.completed_at() {
                    prop_assert!(done >= k);
                    if e + 1 == done {
                        prop_assert!(b <= 0.3);
                    }
                }
            }
        }

        #[test]
        fn scale_invariance(rewards in prop::collection::vec(-1.0..1.0f64, 2..150), c in prop::sample::select(vec![0.5f64, 10.0, -3.0])) {
            let cfg = CtlConfig::default();
            let a = TransferController::replay(&cfg, &rewards).unwrap();
            let scaled: Vec<f64> = rewards.iter().map(|r| c * r).collect();
            let b = TransferController::replay(&cfg, &scaled).unwrap();
            for (x, y) in a.beta_history().iter().zip(b.beta_history()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-15);
            }
        }

        #[test]
        fn decreasing_window_variance_gives_non_increasing_beta(amp in prop::collection::vec(0.01..1.0f64, 1..4)) {
            // alternating ±a blocks with shrinking a
            let k = 10;
            let mut amps = amp.clone();
            amps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let rewards: Vec<f64> = amps.iter().flat_map(|&a| (0..40).map(move |i| if i % 2 == 0 { a } else { -a })).collect();
            let c = TransferController::replay(&CtlConfig { k, gamma_cut: 0.3 }, &rewards).unwrap();
            prop_assume!(c.xi_history()[k - 1..].windows(2).all(|w| w[1] <= w[0]));
            let betas = &c.beta_history()[k - 1..];
            for w in betas.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
