//! Command-line front end: training, evaluation, run comparison.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mflight::aeroenv::Fidelity;
use mflight::checkpoint::{self, Checkpoint, CheckpointError};
use mflight::geometry::write_selig;
use mflight::orchestrator::report::{
    compare_runs, comparison_csv, episodes_csv, histogram_csv, parse_episodes_csv, updates_csv, ReportError,
    RunData, RunSummary,
};
use mflight::orchestrator::{
    evaluate_policy, predict_shape, run_campaign, Environments, OrchestratorError, PhaseName, PredictedShape,
};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Aborted(String),
    #[error("{0}")]
    Version(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Aborted(_) => 3,
            CliError::Version(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Aborted(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "mflight", version, about = "Multi-fidelity reinforcement learning for airfoil drag minimization")]
pub struct Cli {
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhaseArg {
    Source,
    Target,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a training campaign.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a configuration key, e.g. `--set ctl.gamma_cut=0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Transfer even if the source phase ends without the controller completing.
        #[arg(long)]
        force_transfer: bool,
    },
    /// Greedy rollouts of a saved agent.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        /// Distribution to sample states from.
        #[arg(long, value_enum, default_value = "source")]
        phase: PhaseArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare finished runs against the first scratch run.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration.
    Defaults,
}

/// Writes `contents` to `path` via a temporary file and rename, so the file
/// is either complete or absent.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Io(format!("{}: {e}", path.display()))
    })
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("summary types serialize to TOML")
}

/// Selig coordinates and the pressure distribution of a predicted shape.
fn write_shape(dir: &Path, stem: &str, shape: &PredictedShape) -> Result<(), CliError> {
    if let Some(s) = &shape.shape {
        let mut buf = format!("{stem} Re={:e}\n", shape.re_c).into_bytes();
        write_selig(s, &mut buf).map_err(io_err(dir))?;
        write_atomic(&dir.join(format!("{stem}.dat")), &buf)?;
    }
    if let Some(r) = &shape.result {
        let mut buf = Vec::new();
        r.write_cp_csv(&mut buf).map_err(io_err(dir))?;
        write_atomic(&dir.join(format!("{stem}_cp.csv")), &buf)?;
    }
    Ok(())
}

fn write_checkpoint(path: &Path, ck: &Checkpoint<f64>) -> Result<(), CliError> {
    write_atomic(path, checkpoint::to_text(ck).as_bytes())
}

pub fn train(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    set: &[String],
    force_transfer: bool,
) -> Result<RunSummary, CliError> {
    let mut cfg = config::load(config, set)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.force_transfer |= force_transfer;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_atomic(&out.join("config.toml"), to_toml(&cfg).as_bytes())?;
    let report = run_campaign(&cfg)?;
    write_atomic(&out.join("episodes.csv"), episodes_csv(&report).as_bytes())?;
    write_atomic(&out.join("updates.csv"), updates_csv(&report).as_bytes())?;
    if let Some(ck) = &report.source_checkpoint {
        write_checkpoint(&out.join("source.ckpt"), ck)?;
    }
    write_checkpoint(&out.join("final.ckpt"), &report.final_checkpoint)?;
    let envs = Environments::new(&cfg.env);
    let target_env = envs.get(cfg.target.fidelity);
    let params = &report.final_checkpoint.params;
    write_shape(out, "target_mean_shape", &predict_shape(params, &cfg, target_env, cfg.target.mu))?;
    if let Some(ck) = &report.source_checkpoint {
        let shape = predict_shape(&ck.params, &cfg, envs.get(cfg.source.fidelity), cfg.source.mu);
        write_shape(out, "source_mean_shape", &shape)?;
    }
    let summary = RunSummary::from_report(&report);
    write_atomic(&out.join("summary.toml"), to_toml(&summary).as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct EvaluationSummary {
    schema_version: u32,
    phase: PhaseName,
    fidelity: Fidelity,
    mu: f64,
    sigma: f64,
    episodes: usize,
    seed: u64,
    mean: Option<f64>,
    variance: Option<f64>,
    mean_shape_cd: Option<f64>,
}

pub fn evaluate(
    checkpoint: &Path,
    config: &Path,
    episodes: usize,
    out: &Path,
    phase: PhaseArg,
    seed: Option<u64>,
) -> Result<(), CliError> {
    // read everything before touching the output directory
    let text = fs::read_to_string(checkpoint).map_err(io_err(checkpoint))?;
    let ck: Checkpoint<f64> = checkpoint::from_text(&text).map_err(|e| match e {
        CheckpointError::Version(_) | CheckpointError::Scalar { .. } => {
            CliError::Version(format!("{}: {e}", checkpoint.display()))
        }
        CheckpointError::Io(_) => CliError::Io(format!("{}: {e}", checkpoint.display())),
        _ => CliError::Config(format!("{}: {e}", checkpoint.display())),
    })?;
    let mut cfg = config::load(config, &[])?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if ck.params.action_dim() != cfg.network.action_dim {
        return Err(CliError::Config("checkpoint action dimension does not match the configuration".into()));
    }
    let (name, phase_cfg) = match phase {
        PhaseArg::Source => (PhaseName::Source, &cfg.source),
        PhaseArg::Target => (PhaseName::Target, &cfg.target),
    };
    let envs = Environments::new(&cfg.env);
    let env = envs.get(phase_cfg.fidelity);
    let dist = phase_cfg.distribution();
    let eval = evaluate_policy(&ck.params, &cfg, &dist, env, episodes);
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_atomic(&out.join("histogram.csv"), histogram_csv(&eval.histogram).as_bytes())?;
    if let Some(shape) = &eval.mean_shape {
        write_shape(out, "mean_shape", shape)?;
    }
    let finite = |v: f64| v.is_finite().then_some(v);
    let summary = EvaluationSummary {
        schema_version: mflight::orchestrator::SCHEMA_VERSION,
        phase: name,
        fidelity: phase_cfg.fidelity,
        mu: dist.mu,
        sigma: dist.sigma,
        episodes,
        seed: cfg.seed,
        mean: finite(eval.stats.mean),
        variance: finite(eval.stats.variance),
        mean_shape_cd: eval.mean_shape.as_ref().and_then(PredictedShape::cd),
    };
    write_atomic(&out.join("evaluation.toml"), to_toml(&summary).as_bytes())
}

fn read_run(dir: &Path) -> Result<RunData, CliError> {
    let summary_path = dir.join("summary.toml");
    let text = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
    let raw: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display())))?;
    let version = raw.get("schema_version").and_then(toml::Value::as_integer);
    if version != Some(i64::from(mflight::orchestrator::SCHEMA_VERSION)) {
        return Err(CliError::Version(format!(
            "{}: unsupported schema_version {version:?}",
            summary_path.display()
        )));
    }
    let summary: RunSummary = toml::Value::Table(raw)
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display())))?;
    let csv_path = dir.join("episodes.csv");
    let csv = fs::read_to_string(&csv_path).map_err(io_err(&csv_path))?;
    let rows = parse_episodes_csv(&csv).map_err(|e| match e {
        ReportError::Schema { .. } => CliError::Version(format!("{}: {e}", csv_path.display())),
        ReportError::Format { .. } => CliError::Config(format!("{}: {e}", csv_path.display())),
    })?;
    Ok(RunData {
        name: dir.display().to_string(),
        summary,
        target_rewards: rows.iter().filter(|r| r.phase == PhaseName::Target).map(|r| r.reward).collect(),
    })
}

pub fn compare(runs: &[PathBuf], out: &Path) -> Result<String, CliError> {
    let data = runs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    let cmp = compare_runs(&data).ok_or_else(|| CliError::Config("the reference run has no target episodes".into()))?;
    let table = comparison_csv(&cmp);
    write_atomic(out, table.as_bytes())?;
    Ok(table)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out, seed, set, force_transfer } => {
            let s = train(&config, &out, seed, &set, force_transfer)?;
            println!(
                "{} episodes ({} source, {} target); low/high fidelity calls {}/{}; results in {}",
                s.source_episodes + s.target_episodes,
                s.source_episodes,
                s.target_episodes,
                s.low_calls,
                s.high_calls,
                out.display()
            );
        }
        Command::Evaluate { checkpoint, config, episodes, out, phase, seed } => {
            evaluate(&checkpoint, &config, episodes, &out, phase, seed)?;
            println!("evaluation written to {}", out.display());
        }
        Command::Compare { runs, out } => print!("{}", compare(&runs, &out)?),
        Command::Defaults => print!("{}", config::defaults_toml()),
    }
    Ok(())
}
