//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
//!
//! Run with `cargo test -p mflight --test acceptance`. The process exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use mflight::aeroenv::{solve_panel, solve_panel_nonlifting, Fidelity};
use mflight::agent::{NetworkConfig, PolicyParams};
use mflight::checkpoint::{from_text, to_text, Checkpoint};
use mflight::ctl::{transfer, CtlConfig, TransferController};
use mflight::geometry::{AirfoilShape, Point};
use mflight::orchestrator::metrics::{episodes_to_threshold, median, savings, tail_stats};
use mflight::orchestrator::report::episodes_csv;
use mflight::orchestrator::{
    build_pool, collect_round, initial_params, predict_shape, run_campaign, CampaignReport, Environments, Mode,
    PhaseName, RunConfig,
};
use mflight::ppo::{clipped_surrogate, quadratic_toy, EpisodeRecord, ExperienceBatch, PpoConfig};
use mflight::rng::{standard_normal, stream_rng};
use rand::Rng;

// criterion 1
const CP_TOL: f64 = 1e-2;
const CL_SYMMETRIC_TOL: f64 = 1e-6;
const CL_THIN_REL_TOL: f64 = 0.15;
// criterion 2
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor for components whose true derivative is ~0.
const FD_ABS_FLOOR: f64 = 1e-6;
const FD_NETWORKS: u64 = 20;
// criterion 3
const TOY_TARGET: f64 = 0.3;
const TOY_TOL: f64 = 0.05;
const TOY_UPDATES: usize = 500;
const TOY_BATCH: usize = 20;
// criterion 4
const SCALE_REL_TOL: f64 = 1e-12;
// criteria 6-8
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const SOURCE_BUDGET: usize = 5000;
/// Single-fidelity target budget. Long enough for scratch to reach its
/// plateau, short enough that the last 500 episodes still reflect learning:
/// with 5000 episodes both agents sit on the same design and the tail
/// variance is pure Reynolds-number noise.
const SINGLE_TARGET_BUDGET: usize = 1000;
/// Multi-fidelity target budget: the full desk-scale allowance, so that the
/// final shapes compared for drag agreement are trained ones.
const MULTI_TARGET_BUDGET: usize = 5000;
const SINGLE_SAVINGS_MIN: f64 = 0.15;
const MULTI_SAVINGS_MIN: f64 = 0.20;
const CD_AGREEMENT_REL: f64 = 0.10;
const EVAL_RE: [f64; 3] = [6e6, 8e6, 1e7];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn criterion(id: u32, name: &'static str, limit: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let elapsed = t.elapsed();
    let o = Outcome { id, name, pass: pass && elapsed <= limit, detail, elapsed, limit };
    println!(
        "criterion {} [{}]: {} ({}; {:.1}s of {}s allowed)",
        o.id,
        o.name,
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        o.elapsed.as_secs_f64(),
        o.limit.as_secs()
    );
    o
}

fn naca00(thickness: f64, n: usize) -> AirfoilShape<f64> {
    let half = n / 2;
    let yt = |x: f64| {
        5.0 * thickness * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x.powi(3) - 0.1036 * x.powi(4))
    };
    let xs: Vec<f64> = (0..=half).map(|j| 0.5 * (1.0 - (PI * j as f64 / half as f64).cos())).collect();
    let mut pts: Vec<Point<f64>> = xs.iter().rev().map(|&x| Point::new(x, -yt(x))).collect();
    pts.extend(xs.iter().skip(1).map(|&x| Point::new(x, yt(x))));
    let first = pts[0];
    *pts.last_mut().unwrap() = first;
    AirfoilShape::from_points(pts).unwrap()
}

fn panel_validation() -> (bool, String) {
    let n = 200;
    let cyl: Vec<Point<f64>> = (0..=n)
        .map(|k| {
            let th = -2.0 * PI * k as f64 / n as f64 + PI / n as f64;
            Point::new(th.cos(), th.sin())
        })
        .collect();
    let sol = solve_panel_nonlifting(&cyl, 0.0).unwrap();
    let cp_err = sol
        .collocation
        .iter()
        .zip(&sol.cp)
        .map(|(c, cp)| (cp - (1.0 - 4.0 * c.y.atan2(c.x).sin().powi(2))).abs())
        .fold(0.0, f64::max);
    let cl0 = solve_panel(&naca00(0.12, 160), 0.0).unwrap().cl;
    let alpha = 5f64.to_radians();
    let thin = 2.0 * PI * alpha;
    let cl5 = solve_panel(&naca00(0.06, 160), alpha).unwrap().cl;
    let rel = ((cl5 - thin) / thin).abs();
    (
        cp_err <= CP_TOL && cl0.abs() <= CL_SYMMETRIC_TOL && rel <= CL_THIN_REL_TOL,
        format!("max|dCp| {cp_err:.2e}, |Cl(0)| {:.1e}, Cl(5deg) {cl5:.4} vs {thin:.4} ({:.1}%)", cl0.abs(), 100.0 * rel),
    )
}

fn random_network(seed: u64) -> PolicyParams<f64> {
    let mut rng = stream_rng(seed, 90, 0);
    let depth = rng.random_range(1..=2);
    let hidden = (0..depth).map(|_| rng.random_range(3..=8)).collect();
    let cfg = NetworkConfig { hidden, action_dim: rng.random_range(1..=4), output_gain: 1.0, ..Default::default() };
    let mut p = PolicyParams::new(&cfg, &mut rng);
    for ls in &mut p.log_std {
        *ls = rng.random_range(-1.0..0.5);
    }
    p
}

/// Worst elementwise relative error between `analytic` and central
/// differences of `f` over the flat parameter vector.
fn fd_worst(p: &PolicyParams<f64>, analytic: &[f64], f: impl Fn(&PolicyParams<f64>) -> f64) -> f64 {
    let flat = p.to_flat();
    let mut q = p.clone();
    let mut worst = 0.0f64;
    for i in 0..flat.len() {
        let mut v = flat.clone();
        v[i] = flat[i] + FD_STEP;
        q.set_flat(&v);
        let fp = f(&q);
        v[i] = flat[i] - FD_STEP;
        q.set_flat(&v);
        let fm = f(&q);
        let fd = (fp - fm) / (2.0 * FD_STEP);
        worst = worst.max((fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(FD_ABS_FLOOR));
    }
    worst
}

fn gradient_exactness() -> (bool, String) {
    let cfg = PpoConfig { entropy_coeff: 0.01, ..PpoConfig::default() };
    let (mut w_lp, mut w_v, mut w_s) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..FD_NETWORKS {
        let p = random_network(seed);
        let mut rng = stream_rng(seed, 91, 0);
        let state = standard_normal(&mut rng);
        let action: Vec<f64> = (0..p.action_dim()).map(|_| standard_normal(&mut rng)).collect();

        let mut g = vec![0.0; p.param_count()];
        p.accumulate_log_prob_grad(state, &action, 1.0, &mut g);
        w_lp = w_lp.max(fd_worst(&p, &g, |q| q.log_prob(state, &action)));

        let target = 0.7;
        let mut g = vec![0.0; p.param_count()];
        let v = p.value(state);
        p.accumulate_value_grad(state, 2.0 * (v - target), &mut g);
        w_v = w_v.max(fd_worst(&p, &g, |q| (q.value(state) - target).powi(2)));

        let records: Vec<_> = (0..8)
            .map(|i| {
                let s = standard_normal(&mut rng);
                let a = p.act(s, &mut rng);
                let lp_old = a.log_prob + 0.3 * standard_normal(&mut rng);
                EpisodeRecord::single_step(s, a.action, lp_old, -0.1 * i as f64, p.value(s))
            })
            .collect();
        let batch = ExperienceBatch::new(records);
        let (_, g) = clipped_surrogate(&batch, &p, &cfg).unwrap();
        w_s = w_s.max(fd_worst(&p, &g, |q| clipped_surrogate(&batch, q, &cfg).unwrap().0.total));
    }
    let worst = w_lp.max(w_v).max(w_s);
    (
        worst <= FD_REL_TOL,
        format!("{FD_NETWORKS} networks; worst rel err log-prob {w_lp:.1e}, value {w_v:.1e}, surrogate {w_s:.1e}"),
    )
}

fn ppo_toy() -> (bool, String) {
    let means: Vec<f64> =
        (0..10).map(|seed| quadratic_toy(seed, TOY_UPDATES, TOY_BATCH, TOY_TARGET, &PpoConfig::default())).collect();
    let hits = means.iter().filter(|m| (*m - TOY_TARGET).abs() <= TOY_TOL).count();
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    (hits >= 9, format!("{hits}/10 seeds within {TOY_TARGET} +- {TOY_TOL}: [{}]", shown.join(", ")))
}

fn ctl_scripts() -> (bool, String) {
    let cfg = CtlConfig::default();
    let script = |seed: u64| -> Vec<f64> {
        let mut rng = stream_rng(seed, 92, 0);
        (0..400).map(|i| if i < 200 { 1.0 } else { 0.01 } * standard_normal(&mut rng)).collect()
    };
    let mut ok = 0;
    let mut scale_ok = true;
    for seed in 0..20 {
        let raw = script(seed);
        let c = TransferController::replay(&cfg, &raw).unwrap();
        if matches!(c.completed_at(), Some(e) if e > 200 && e < 400) {
            ok += 1;
        }
        for k in [0.5, 10.0] {
            let scaled: Vec<f64> = raw.iter().map(|r| k * r).collect();
            let s = TransferController::replay(&cfg, &scaled).unwrap();
            scale_ok &= s.completed_at() == c.completed_at();
            scale_ok &= c.beta_history().iter().zip(s.beta_history()).all(|(a, b)| {
                if k == 0.5 {
                    a == b
                } else {
                    (a - b).abs() <= SCALE_REL_TOL * a.abs()
                }
            });
        }
    }
    (
        ok >= 19 && scale_ok,
        format!("{ok}/20 scripts complete only in the quiet regime; scale invariance (0.5 exact, 10 to 1e-12) {scale_ok}"),
    )
}

fn determinism() -> (bool, String) {
    let mut cfg = RunConfig { mode: Mode::SingleFidelityCtl, seed: 7, force_transfer: true, ..Default::default() };
    cfg.source.max_episodes = 200;
    cfg.target.max_episodes = 200;
    let a = run_campaign(&cfg).unwrap();
    let b = run_campaign(&cfg).unwrap();
    let same_csv = episodes_csv(&a) == episodes_csv(&b);

    let envs = Environments::new(&cfg.env);
    let params = initial_params(&cfg);
    let dist = cfg.target.distribution();
    let strip = |v: Vec<mflight::orchestrator::Episode>| v.into_iter().map(|e| (e.index, e.re_c, e.record)).collect::<Vec<_>>();
    let mut c1 = cfg.clone();
    c1.workers = 1;
    let one = collect_round(&build_pool(1), &c1, &envs.low, &dist, &params, PhaseName::Target, 0, 20).unwrap();
    let four = collect_round(&build_pool(4), &cfg, &envs.low, &dist, &params, PhaseName::Target, 0, 20).unwrap();
    let same_batch = strip(one) == strip(four);

    let w1 = run_campaign(&c1).unwrap();
    let key = |r: &CampaignReport| {
        r.episodes().map(|e| (e.episode, e.re_c.to_bits(), e.reward.to_bits(), e.beta.map(f64::to_bits))).collect::<Vec<_>>()
    };
    let same_run = key(&a) == key(&w1) && a.final_checkpoint == w1.final_checkpoint;
    (
        same_csv && same_batch && same_run,
        format!("repeat run byte-identical {same_csv}; W=1 vs W=4 batch identical {same_batch}, full run identical {same_run}"),
    )
}

struct Pair {
    seed: u64,
    scratch: CampaignReport,
    ctl: CampaignReport,
}

impl Pair {
    fn threshold(&self) -> f64 {
        self.scratch.target_metrics.reference_threshold()
    }

    fn ett(&self) -> (Option<usize>, Option<usize>) {
        let k = self.scratch.config.metrics.trailing_window;
        let t = self.threshold();
        (
            episodes_to_threshold(&self.scratch.target.rewards(), k, t),
            episodes_to_threshold(&self.ctl.target.rewards(), k, t),
        )
    }
}

fn paired_runs(mode: Mode, target_fidelity: Fidelity, target_budget: usize) -> Vec<Pair> {
    std::thread::scope(|s| {
        let handles: Vec<_> = SEEDS
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let mut cfg = RunConfig { seed, ..Default::default() };
                    cfg.source.max_episodes = SOURCE_BUDGET;
                    cfg.target.max_episodes = target_budget;
                    cfg.target.mu = 8e6;
                    cfg.target.fidelity = target_fidelity;
                    let scratch = run_campaign(&RunConfig { mode: Mode::Scratch, ..cfg.clone() }).unwrap();
                    let ctl = run_campaign(&RunConfig { mode, ..cfg }).unwrap();
                    Pair { seed, scratch, ctl }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn fmt_opt(e: Option<usize>) -> String {
    e.map_or_else(|| "never".into(), |e| e.to_string())
}

fn single_fidelity(pairs: &[Pair]) -> (bool, String) {
    let mut sav = Vec::new();
    let mut var_wins = 0;
    let mut completed = 0;
    let mut rows = Vec::new();
    for p in pairs {
        let (es, ec) = p.ett();
        let s = savings(ec, SINGLE_TARGET_BUDGET, es).unwrap_or(f64::NEG_INFINITY);
        let n = p.scratch.config.metrics.last_n;
        let vs = tail_stats(&p.scratch.target.rewards(), n).variance;
        let vc = tail_stats(&p.ctl.target.rewards(), n).variance;
        var_wins += usize::from(vc <= vs);
        completed += usize::from(p.ctl.source.as_ref().unwrap().completed_at.is_some());
        sav.push(s);
        rows.push(format!("seed {} ett {}/{} var {vc:.2e}/{vs:.2e}", p.seed, fmt_opt(ec), fmt_opt(es)));
    }
    let med = median(&mut sav).unwrap();
    (
        med >= SINGLE_SAVINGS_MIN && var_wins >= 4,
        format!(
            "median savings {:.1}% (need {:.0}%), ctl variance <= scratch in {var_wins}/5, source complete {completed}/5; ctl/scratch: {}",
            100.0 * med,
            100.0 * SINGLE_SAVINGS_MIN,
            rows.join("; ")
        ),
    )
}

fn multi_fidelity(pairs: &[Pair]) -> (bool, String) {
    let mut sav = Vec::new();
    let mut rows = Vec::new();
    let mut no_high_in_source = true;
    for p in pairs {
        no_high_in_source &= p.ctl.high_calls_during_source == 0;
        let (es, ec) = p.ett();
        let source_high = p.ctl.high_calls_during_source as usize;
        let s = savings(ec.map(|e| e + source_high), MULTI_TARGET_BUDGET + source_high, es).unwrap_or(f64::NEG_INFINITY);
        sav.push(s);
        rows.push(format!("seed {} hi-fi to threshold {}/{} ({:+.0}%)", p.seed, fmt_opt(ec), fmt_opt(es), 100.0 * s));
    }
    let med = median(&mut sav).unwrap();
    (
        med >= MULTI_SAVINGS_MIN && no_high_in_source,
        format!(
            "median hi-fi savings {:.1}% (need {:.0}%), zero hi-fi calls in source {no_high_in_source}; ctl/scratch: {}",
            100.0 * med,
            100.0 * MULTI_SAVINGS_MIN,
            rows.join("; ")
        ),
    )
}

fn drag_agreement(pairs: &[Pair]) -> (bool, String) {
    let envs = Environments::new(&pairs[0].ctl.config.env);
    let mut matches = Vec::new();
    let mut rows = Vec::new();
    for p in pairs {
        let mut m = 0;
        let mut cds = Vec::new();
        for re in EVAL_RE {
            let c = predict_shape(&p.ctl.final_checkpoint.params, &p.ctl.config, &envs.high, re).cd();
            let s = predict_shape(&p.scratch.final_checkpoint.params, &p.scratch.config, &envs.high, re).cd();
            if let (Some(c), Some(s)) = (c, s) {
                m += usize::from(((c - s) / s).abs() <= CD_AGREEMENT_REL);
            }
            cds.push(format!(
                "{:.5}/{:.5}",
                c.unwrap_or(f64::NAN),
                s.unwrap_or(f64::NAN)
            ));
        }
        matches.push(m as f64);
        rows.push(format!("seed {} {m}/3 [{}]", p.seed, cds.join(" ")));
    }
    let med = median(&mut matches).unwrap();
    (
        med >= 2.0,
        format!("median seed matches {med}/3 Re points within {:.0}%; ctl/scratch Cd: {}", 100.0 * CD_AGREEMENT_REL, rows.join("; ")),
    )
}

fn checkpoint_round_trip() -> (bool, String) {
    let mut cfg = RunConfig { mode: Mode::SingleFidelityCtl, seed: 3, force_transfer: true, ..Default::default() };
    cfg.source.max_episodes = 100;
    cfg.target.max_episodes = 20;
    let report = run_campaign(&cfg).unwrap();
    let src = report.source_checkpoint.clone().unwrap();
    let first = to_text(&src);
    let loaded: Checkpoint<f64> = from_text(&first).unwrap();
    let stable = to_text(&loaded) == first;
    let target = Checkpoint { params: transfer(&loaded.params), controller: loaded.controller.clone() };
    let transfer_identical = to_text(&target) == first && report.target_initial == loaded.params;
    let state = 0.37;
    let same_action = target.params.greedy_action(state) == src.params.greedy_action(state);
    (
        stable && transfer_identical && same_action,
        format!("save-load-save identical {stable}; transferred checkpoint identical {transfer_identical}; first greedy action equal {same_action}"),
    )
}

fn main() {
    let mut out = vec![
        criterion(1, "panel solver analytic validation", secs(5), panel_validation),
        criterion(2, "gradient exactness", secs(30), gradient_exactness),
        criterion(3, "PPO sanity convergence", secs(60), ppo_toy),
        criterion(4, "transfer criterion on scripted rewards", secs(5), ctl_scripts),
        criterion(5, "determinism", secs(120), determinism),
    ];
    let mut single = Vec::new();
    out.push(criterion(6, "single-fidelity transfer experiment", secs(15 * 60), || {
        single = paired_runs(Mode::SingleFidelityCtl, Fidelity::Low, SINGLE_TARGET_BUDGET);
        single_fidelity(&single)
    }));
    let mut multi = Vec::new();
    out.push(criterion(7, "multi-fidelity transfer experiment", secs(30 * 60), || {
        multi = paired_runs(Mode::MultiFidelityCtl, Fidelity::High, MULTI_TARGET_BUDGET);
        multi_fidelity(&multi)
    }));
    // reuses criterion 7's trained agents
    out.push(criterion(8, "transfer fidelity agreement", secs(60), || drag_agreement(&multi)));
    out.push(criterion(9, "checkpoint round trip", secs(5), checkpoint_round_trip));

    let failed: Vec<String> = out.iter().filter(|o| !o.pass).map(|o| o.id.to_string()).collect();
    println!("acceptance: {}/{} criteria passed", out.len() - failed.len(), out.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
