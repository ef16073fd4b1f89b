//! Run artifacts: versioned CSV logs, the run summary, and run comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{default_threshold, episodes_to_threshold, tail_stats, trailing_means, TailStats};
use super::{CampaignReport, HistogramBin, Mode, PhaseName, TargetMetrics};
use crate::aeroenv::Fidelity;

pub const EPISODES_SCHEMA: &str = "# mflight-episodes v1";
pub const UPDATES_SCHEMA: &str = "# mflight-updates v1";
pub const HISTOGRAM_SCHEMA: &str = "# mflight-histogram v1";
pub const EPISODES_HEADER: &str = "episode,phase,fidelity,worker,re_c,reward,beta,clip_fraction";
const UPDATES_HEADER: &str =
    "phase,round,last_episode,epochs,mean_ratio,clip_fraction,value_loss,entropy,kl,grad_norm,early_stopped,discarded";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("unsupported log schema {found:?} (expected {expected:?})")]
    Schema { found: String, expected: &'static str },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn episodes_csv(report: &CampaignReport) -> String {
    let mut out = format!("{EPISODES_SCHEMA}\n{EPISODES_HEADER}\n");
    for e in report.episodes() {
        let beta = e.beta.map_or_else(String::new, |b| format!("{b:e}"));
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{:e},{beta},{:e}",
            e.episode,
            e.phase.as_str(),
            e.fidelity,
            e.worker,
            e.re_c,
            e.reward,
            e.clip_fraction
        );
    }
    out
}

pub fn updates_csv(report: &CampaignReport) -> String {
    let mut out = format!("{UPDATES_SCHEMA}\n{UPDATES_HEADER}\n");
    for u in report.updates() {
        let _ = write!(out, "{},{},{},", u.phase.as_str(), u.round, u.last_episode);
        match &u.stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{},{:e},{:e},{:e},{:e},{:e},{:e},{},false",
                    s.epochs, s.mean_ratio, s.clip_fraction, s.value_loss, s.entropy, s.kl, s.grad_norm, s.early_stopped
                );
            }
            None => out.push_str("0,,,,,,,false,true\n"),
        }
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = format!("{HISTOGRAM_SCHEMA}\nbin,lo,hi,count\n");
    for (i, b) in bins.iter().enumerate() {
        let _ = writeln!(out, "{i},{:e},{:e},{}", b.lo, b.hi, b.count);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub phase: PhaseName,
    pub fidelity: Fidelity,
    pub worker: usize,
    pub re_c: f64,
    pub reward: f64,
    pub beta: Option<f64>,
    pub clip_fraction: f64,
}

pub fn parse_episodes_csv(text: &str) -> Result<Vec<EpisodeRow>, ReportError> {
    let mut lines = text.lines();
    let schema = lines.next().unwrap_or_default();
    if schema != EPISODES_SCHEMA {
        return Err(ReportError::Schema { found: schema.to_string(), expected: EPISODES_SCHEMA });
    }
    if lines.next() != Some(EPISODES_HEADER) {
        return Err(ReportError::Format { line: 2, message: "unexpected column header".into() });
    }
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 3;
        let bad = |message: &str| ReportError::Format { line, message: message.to_string() };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("malformed number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed integer"));
        rows.push(EpisodeRow {
            episode: int(f[0])?,
            phase: match f[1] {
                "source" => PhaseName::Source,
                "target" => PhaseName::Target,
                _ => return Err(bad("unknown phase")),
            },
            fidelity: match f[2] {
                "low" => Fidelity::Low,
                "high" => Fidelity::High,
                _ => return Err(bad("unknown fidelity")),
            },
            worker: int(f[3])?,
            re_c: num(f[4])?,
            reward: num(f[5])?,
            beta: if f[6].is_empty() { None } else { Some(num(f[6])?) },
            clip_fraction: num(f[7])?,
        });
    }
    Ok(rows)
}

/// Structured summary written next to the logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub workers: usize,
    pub episodes_per_round: usize,
    pub source_episodes: usize,
    pub source_completed_at: Option<usize>,
    pub target_fidelity: Fidelity,
    pub target_episodes: usize,
    pub low_calls: u64,
    pub high_calls: u64,
    pub high_calls_during_source: u64,
    pub trailing_window: usize,
    pub last_n: usize,
    pub target: TargetMetrics,
}

impl RunSummary {
    pub fn from_report(r: &CampaignReport) -> Self {
        Self {
            schema_version: super::SCHEMA_VERSION,
            mode: r.config.mode,
            seed: r.config.seed,
            workers: r.config.workers,
            episodes_per_round: r.config.episodes_per_round,
            source_episodes: r.source.as_ref().map_or(0, |s| s.episodes.len()),
            source_completed_at: r.source.as_ref().and_then(|s| s.completed_at),
            target_fidelity: r.target.fidelity,
            target_episodes: r.target.episodes.len(),
            low_calls: r.low_calls,
            high_calls: r.high_calls,
            high_calls_during_source: r.high_calls_during_source,
            trailing_window: r.config.metrics.trailing_window,
            last_n: r.config.metrics.last_n,
            target: r.target_metrics.clone(),
        }
    }
}

/// A finished run as read back from disk.
#[derive(Debug, Clone)]
pub struct RunData {
    pub name: String,
    pub summary: RunSummary,
    pub target_rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub mode: Mode,
    pub episodes_to_threshold: Option<usize>,
    pub tail: TailStats,
    pub high_fidelity_episodes: u64,
    /// Episodes charged against the run: high-fidelity episodes to threshold
    /// for a high-fidelity target, target episodes to threshold otherwise.
    pub cost: usize,
    pub savings: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: String,
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Compares runs against the first scratch run (the first run if none is
/// scratch). The threshold is derived from that reference's final trailing
/// mean.
pub fn compare_runs(runs: &[RunData]) -> Option<Comparison> {
    let reference = runs.iter().find(|r| r.summary.mode == Mode::Scratch).or_else(|| runs.first())?;
    let k = reference.summary.trailing_window;
    let threshold = default_threshold(*trailing_means(&reference.target_rewards, k).last()?);
    let row = |run: &RunData| {
        let s = &run.summary;
        let ett = episodes_to_threshold(&run.target_rewards, s.trailing_window, threshold);
        let spent = ett.unwrap_or(run.target_rewards.len());
        let high = s.high_calls_during_source + if s.target_fidelity == Fidelity::High { spent as u64 } else { 0 };
        let cost = if s.target_fidelity == Fidelity::High { high as usize } else { spent };
        (ett, high, cost)
    };
    let (_, _, ref_cost) = row(reference);
    let rows = runs
        .iter()
        .map(|run| {
            let (ett, high, cost) = row(run);
            ComparisonRow {
                name: run.name.clone(),
                mode: run.summary.mode,
                episodes_to_threshold: ett,
                tail: tail_stats(&run.target_rewards, run.summary.last_n),
                high_fidelity_episodes: high,
                cost,
                savings: if ref_cost == 0 { 0.0 } else { 1.0 - cost as f64 / ref_cost as f64 },
            }
        })
        .collect();
    Some(Comparison { reference: reference.name.clone(), threshold, rows })
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = format!(
        "# mflight-compare v1\n# reference {} threshold {:e}\nrun,mode,episodes_to_threshold,last_mean,last_variance,high_fidelity_episodes,savings_pct\n",
        c.reference, c.threshold
    );
    for r in &c.rows {
        let ett = r.episodes_to_threshold.map_or_else(|| "never".to_string(), |e| e.to_string());
        let _ = writeln!(
            out,
            "{},{},{ett},{:e},{:e},{},{:.2}",
            r.name,
            r.mode.as_str(),
            r.tail.mean,
            r.tail.variance,
            r.high_fidelity_episodes,
            100.0 * r.savings
        );
    }
    out
}
