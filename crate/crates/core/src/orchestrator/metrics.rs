//! Learning-curve metrics used to compare campaigns.

use serde::{Deserialize, Serialize};

/// Mean of the last `min(e, k)` rewards for every episode `e`.
pub fn trailing_means(rewards: &[f64], k: usize) -> Vec<f64> {
    let k = k.max(1);
    let mut out = Vec::with_capacity(rewards.len());
    let mut sum = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        sum += r;
        if i >= k {
            sum -= rewards[i - k];
        }
        // recompute periodically so long runs do not accumulate drift
        if i % 1024 == 1023 {
            sum = rewards[(i + 1).saturating_sub(k)..=i].iter().sum();
        }
        out.push(sum / (i + 1).min(k) as f64);
    }
    out
}

/// First 1-based episode `e ≥ k` whose trailing-`k` mean reaches `threshold`.
///
/// Partial warm-up windows never count: a lucky first few rewards would
/// otherwise register as convergence.
pub fn episodes_to_threshold(rewards: &[f64], k: usize, threshold: f64) -> Option<usize> {
    let k = k.max(1);
    trailing_means(rewards, k)
        .iter()
        .enumerate()
        .skip(k - 1)
        .find(|(_, &m)| m >= threshold)
        .map(|(i, _)| i + 1)
}

/// Threshold derived from a reference run's final trailing mean `m`: the
/// level 5% of `|m|` below it.
///
/// For the negative drag rewards, "95% of m" would be a level *above* the
/// reference's own final value, which the reference itself never reaches.
pub fn default_threshold(final_trailing_mean: f64) -> f64 {
    final_trailing_mean - 0.05 * final_trailing_mean.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub count: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
}

/// Mean and variance of the last `n` rewards (all of them if fewer).
pub fn tail_stats(rewards: &[f64], n: usize) -> TailStats {
    let tail = &rewards[rewards.len().saturating_sub(n)..];
    if tail.is_empty() {
        return TailStats { count: 0, mean: f64::NAN, variance: f64::NAN };
    }
    let count = tail.len();
    let mean = tail.iter().sum::<f64>() / count as f64;
    let variance = tail.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / count as f64;
    TailStats { count, mean, variance }
}

/// Fractional saving `1 − candidate / reference` in episodes to threshold.
///
/// A candidate that never reached the threshold counts as spending its whole
/// `candidate_budget`. `None` when the reference never reached it.
pub fn savings(candidate: Option<usize>, candidate_budget: usize, reference: Option<usize>) -> Option<f64> {
    let reference = reference? as f64;
    let spent = candidate.unwrap_or(candidate_budget) as f64;
    Some(1.0 - spent / reference)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}
