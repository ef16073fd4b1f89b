//! Flow environments: Reynolds-number state sampling, a low- and a
//! high-fidelity drag model behind one [`Environment`] interface, and the
//! single-step episode that turns a design into a `-Cd` reward.

pub mod boundary_layer;
pub mod linalg;
pub mod panel;

use std::fmt;
use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{build_airfoil, decode, AirfoilShape, BuildOptions, DesignVector, GeometryBounds};
use crate::scalar::Real;
use boundary_layer::{march, BoundaryLayerOptions};
use linalg::Singular;
pub use panel::{solve_panel, solve_panel_nonlifting, PanelSolution};

/// Reward assigned to invalid or non-converged episodes.
pub const DEFAULT_PENALTY: f64 = -0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AeroError {
    #[error("shape is not a valid airfoil")]
    InvalidShape,
    #[error("need at least 3 panels, got {0}")]
    TooFewPanels(usize),
    #[error("influence matrix: {0}")]
    Solver(Singular),
    #[error("solver produced non-finite values")]
    NonFinite,
    #[error("invalid state distribution: {0}")]
    Distribution(String),
}

/// Gaussian over chord Reynolds number, truncated to `mu ± 6 sigma` and floored at `1e5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDistribution {
    pub mu: f64,
    pub sigma: f64,
}

impl StateDistribution {
    pub const FLOOR: f64 = 1e5;

    pub fn new(mu: f64, sigma: f64) -> Result<Self, AeroError> {
        let d = Self { mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), AeroError> {
        if !(self.mu.is_finite() && self.mu > 0.0 && self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(AeroError::Distribution(format!(
                "need mu > 0 and sigma > 0, got N({}, {})",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }

    /// Draws one state from exactly two uniform variates (Box–Muller, cosine branch).
    pub fn sample<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let z = crate::rng::standard_normal(rng);
        let lo = self.mu - 6.0 * self.sigma;
        let hi = self.mu + 6.0 * self.sigma;
        T::lit((self.mu + self.sigma * z).clamp(lo, hi).max(Self::FLOOR))
    }
}

/// Free-function form of [`StateDistribution::sample`].
pub fn sample_state<T: Real, R: Rng + ?Sized>(dist: &StateDistribution, rng: &mut R) -> T {
    dist.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Low,
    High,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::Low => "low",
            Fidelity::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeroResult<T> {
    pub cd: T,
    pub cl: T,
    /// Pressure coefficient at each panel midpoint.
    pub cp: Vec<T>,
    /// Chordwise station of each `cp` entry.
    pub x: Vec<T>,
    pub converged: bool,
}

impl<T: Real> AeroResult<T> {
    /// Writes the `x,cp` distribution as CSV.
    pub fn write_cp_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,cp")?;
        for (x, cp) in self.x.iter().zip(&self.cp) {
            writeln!(out, "{x:.10},{cp:.10}")?;
        }
        Ok(())
    }
}

/// Number of episodes an environment has been asked to run.
#[derive(Debug, Default)]
pub struct CallCounter(AtomicU64);

impl CallCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// A flow model the agent can be trained against.
///
/// `evaluate` is a deterministic function of `(shape, re_c)`; implementations
/// are shared read-only between worker threads.
pub trait Environment<T: Real>: Send + Sync {
    fn fidelity(&self) -> Fidelity;

    /// Panel count used to discretize proposed shapes.
    fn panels(&self) -> usize;

    fn evaluate(&self, shape: &AirfoilShape<T>, re_c: T) -> Result<AeroResult<T>, AeroError>;

    fn counter(&self) -> &CallCounter;

    /// Episodes run against this environment so far, penalized ones included.
    fn episodes(&self) -> u64 {
        self.counter().get()
    }
}

/// Turbulent flat-plate skin friction `0.074 Re^(-1/5)`.
pub fn flat_plate_cf<T: Real>(re_c: T) -> T {
    T::lit(0.074) * re_c.powf(T::lit(-0.2))
}

/// Thickness form factor `1 + 2.7 t/c + 100 (t/c)^4`.
pub fn form_factor<T: Real>(tc: T) -> T {
    T::one() + T::lit(2.7) * tc + T::lit(100.0) * tc.powi(4)
}

/// Potential-flow environment with a form-factor skin-friction drag closure.
#[derive(Debug)]
pub struct LowFidelity<T> {
    pub alpha: T,
    pub panels: usize,
    calls: CallCounter,
}

impl<T: Real> LowFidelity<T> {
    pub const DEFAULT_PANELS: usize = 60;

    pub fn new(alpha: T, panels: usize) -> Self {
        Self { alpha, panels, calls: CallCounter::default() }
    }
}

impl<T: Real> Default for LowFidelity<T> {
    fn default() -> Self {
        Self::new(T::zero(), Self::DEFAULT_PANELS)
    }
}

/// `Cd = 2 Cf(Re) FF(t/c)` plus panel-method `Cl`/`Cp`.
pub fn low_fidelity_cd<T: Real>(shape: &AirfoilShape<T>, re_c: T, alpha: T) -> Result<AeroResult<T>, AeroError> {
    let sol = solve_panel(shape, alpha)?;
    let cd = T::lit(2.0) * flat_plate_cf(re_c) * form_factor(shape.thickness_ratio());
    Ok(AeroResult { cd, cl: sol.cl, x: sol.collocation.iter().map(|p| p.x).collect(), cp: sol.cp, converged: true })
}

impl<T: Real> Environment<T> for LowFidelity<T> {
    fn fidelity(&self) -> Fidelity {
        Fidelity::Low
    }

    fn panels(&self) -> usize {
        self.panels
    }

    fn evaluate(&self, shape: &AirfoilShape<T>, re_c: T) -> Result<AeroResult<T>, AeroError> {
        low_fidelity_cd(shape, re_c, self.alpha)
    }

    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}

/// Viscous-inviscid environment: panel edge velocities drive an integral
/// boundary-layer march, drag from Squire–Young.
#[derive(Debug)]
pub struct HighFidelity<T> {
    pub alpha: T,
    pub panels: usize,
    pub boundary_layer: BoundaryLayerOptions<T>,
    calls: CallCounter,
}

impl<T: Real> HighFidelity<T> {
    pub const DEFAULT_PANELS: usize = 200;

    pub fn new(alpha: T, panels: usize) -> Self {
        Self { alpha, panels, boundary_layer: BoundaryLayerOptions::default(), calls: CallCounter::default() }
    }
}

impl<T: Real> Default for HighFidelity<T> {
    fn default() -> Self {
        Self::new(T::zero(), Self::DEFAULT_PANELS)
    }
}

pub fn high_fidelity_cd<T: Real>(
    shape: &AirfoilShape<T>,
    re_c: T,
    alpha: T,
    opts: &BoundaryLayerOptions<T>,
) -> Result<AeroResult<T>, AeroError> {
    let sol = solve_panel(shape, alpha)?;
    let bl = march(&sol, re_c, opts);
    let (cd, converged) = match bl {
        Some(r) => (r.cd, r.converged),
        None => (T::nan(), false),
    };
    Ok(AeroResult { cd, cl: sol.cl, x: sol.collocation.iter().map(|p| p.x).collect(), cp: sol.cp, converged })
}

impl<T: Real> Environment<T> for HighFidelity<T> {
    fn fidelity(&self) -> Fidelity {
        Fidelity::High
    }

    fn panels(&self) -> usize {
        self.panels
    }

    fn evaluate(&self, shape: &AirfoilShape<T>, re_c: T) -> Result<AeroResult<T>, AeroError> {
        high_fidelity_cd(shape, re_c, self.alpha, &self.boundary_layer)
    }

    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}

/// Decodes a design against `bounds` and samples it with `n_points` panels.
pub fn build_design<T: Real>(
    design: &DesignVector<T>,
    bounds: &GeometryBounds<T>,
    n_points: usize,
) -> Result<AirfoilShape<T>, crate::geometry::GeometryError> {
    build_airfoil(&decode(design, bounds)?, &BuildOptions::with_points(n_points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeStatus {
    Ok,
    InvalidShape,
    NotConverged,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo<T> {
    pub status: EpisodeStatus,
    pub cd: Option<T>,
    pub cl: Option<T>,
}

/// Runs one complete episode: decode and build the shape, evaluate it, and
/// return `-Cd`, or `penalty` for any failure mode.
pub fn step<T: Real, E: Environment<T> + ?Sized>(
    env: &E,
    bounds: &GeometryBounds<T>,
    design: &DesignVector<T>,
    re_c: T,
    penalty: T,
) -> (T, StepInfo<T>) {
    env.counter().bump();
    let fail = |status| (penalty, StepInfo { status, cd: None, cl: None });
    let shape = match build_design(design, bounds, env.panels()) {
        Ok(s) if s.is_valid() => s,
        _ => return fail(EpisodeStatus::InvalidShape),
    };
    match env.evaluate(&shape, re_c) {
        Ok(r) if r.converged && r.cd.is_finite() && r.cd >= T::zero() => {
            (-r.cd, StepInfo { status: EpisodeStatus::Ok, cd: Some(r.cd), cl: Some(r.cl) })
        }
        Ok(_) => fail(EpisodeStatus::NotConverged),
        Err(AeroError::InvalidShape) => fail(EpisodeStatus::InvalidShape),
        Err(_) => fail(EpisodeStatus::SolverFailure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ControlPolygon, Point, DESIGN_DIM};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape_with(tc_scale: f64, n: usize) -> AirfoilShape<f64> {
        let up = [Point::new(0.2, 0.1 * tc_scale), Point::new(0.5, 0.09 * tc_scale), Point::new(0.8, 0.04 * tc_scale)];
        let poly = ControlPolygon { upper: up, lower: up, leading_edge_radius: 0.01 }.symmetrized();
        build_airfoil(&poly, &BuildOptions::with_points(n)).unwrap()
    }

    #[test]
    fn degenerate_distribution_returns_mean() {
        let d = StateDistribution::new(5.5e6, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: f64 = d.sample(&mut rng);
        assert!((x - 5.5e6).abs() < 1e-3 * 5.5e6);
    }

    #[test]
    fn sample_mean_within_three_standard_errors() {
        let d = StateDistribution::new(5.5e6, 5e5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean = (0..n).map(|_| d.sample::<f64, _>(&mut rng)).sum::<f64>() / n as f64;
        let se = 5e5 / (n as f64).sqrt();
        assert!((mean - 5.5e6).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn sampling_is_seed_deterministic_and_truncated() {
        let d = StateDistribution::new(2e5, 1e5).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..1000).map(|_| d.sample::<f64, _>(&mut rng)).collect::<Vec<_>>()
        };
        let a = draw(42);
        assert_eq!(a, draw(42));
        assert!(a.iter().all(|&x| (StateDistribution::FLOOR..=8e5).contains(&x)));
        assert!(a.iter().any(|&x| x == StateDistribution::FLOOR));
        assert!(StateDistribution::new(1e6, 0.0).is_err());
        assert!(StateDistribution::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn sample_consumes_one_draw_pair() {
        let d = StateDistribution::new(5.5e6, 5e5).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let _: f64 = d.sample(&mut a);
        let _: f64 = b.random();
        let _: f64 = b.random();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn flat_plate_limit_of_low_fidelity_drag() {
        let cd = 2.0 * flat_plate_cf(1e7f64) * form_factor(0.0);
        assert!((cd - 0.005892).abs() < 1e-6, "{cd}");
    }

    #[test]
    fn low_fidelity_monotonicity() {
        let thin = shape_with(0.5, 60);
        let thick = shape_with(1.0, 60);
        let a = low_fidelity_cd(&thin, 6e6, 0.0).unwrap();
        let b = low_fidelity_cd(&thick, 6e6, 0.0).unwrap();
        assert!(b.cd > a.cd);
        let c = low_fidelity_cd(&thick, 1e7, 0.0).unwrap();
        assert!(c.cd < b.cd);
        assert_eq!(a.cp.len(), 60);
    }

    #[test]
    fn high_fidelity_is_deterministic_and_decreases_with_reynolds() {
        let shape = shape_with(1.0, 200);
        let opts = BoundaryLayerOptions::default();
        let a = high_fidelity_cd(&shape, 6e6, 0.0, &opts).unwrap();
        let b = high_fidelity_cd(&shape, 6e6, 0.0, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        let c = high_fidelity_cd(&shape, 1e7, 0.0, &opts).unwrap();
        assert!(c.cd < a.cd, "{} !< {}", c.cd, a.cd);
    }

    #[test]
    fn high_fidelity_within_band_of_low_fidelity() {
        let shape = shape_with(0.84, 200);
        let tc = shape.thickness_ratio();
        assert!((tc - 0.12).abs() < 0.002, "t/c {tc}");
        let opts = BoundaryLayerOptions::default();
        for re in [5e6, 6e6, 8e6, 1e7] {
            let lo = low_fidelity_cd(&shape, re, 0.0).unwrap().cd;
            let hi = high_fidelity_cd(&shape, re, 0.0, &opts).unwrap().cd;
            assert!(hi > 0.5 * lo && hi < 2.0 * lo, "Re {re}: hi {hi} lo {lo}");
        }
    }

    #[test]
    fn step_maps_failures_to_penalty() {
        let env = LowFidelity::<f64>::default();
        let bounds = GeometryBounds::default();
        let mut v = [0.0; DESIGN_DIM];
        for i in [1, 3, 5] {
            v[i] = -1.0;
        }
        for i in [7, 9, 11] {
            v[i] = 1.0;
        }
        let flat = DesignVector::new(v).unwrap();
        let (r, info) = step(&env, &bounds, &flat, 6e6, DEFAULT_PENALTY);
        assert_eq!(r, -0.1);
        assert_eq!(info.status, EpisodeStatus::InvalidShape);
        assert_eq!(env.episodes(), 1);
    }

    #[test]
    fn step_reward_is_negative_drag() {
        let env = LowFidelity::<f64>::default();
        let bounds = GeometryBounds::default();
        let design = DesignVector::zeros();
        let (r1, info) = step(&env, &bounds, &design, 6e6, DEFAULT_PENALTY);
        let (r2, _) = step(&env, &bounds, &design, 6e6, DEFAULT_PENALTY);
        assert_eq!(r1, r2);
        assert_eq!(r1, -info.cd.unwrap());
        assert!(r1 < 0.0 && r1 > DEFAULT_PENALTY);
        assert_eq!(env.episodes(), 2);
    }

    #[test]
    fn both_fidelities_share_the_interface() {
        let envs: Vec<Box<dyn Environment<f64>>> =
            vec![Box::new(LowFidelity::default()), Box::new(HighFidelity::default())];
        let bounds = GeometryBounds::default();
        let mut v = [0.0; DESIGN_DIM];
        for i in [1, 3, 5] {
            v[i] = -0.6;
        }
        for i in [7, 9, 11] {
            v[i] = 0.6;
        }
        let design = DesignVector::new(v).unwrap();
        for env in &envs {
            let (r, info) = step(env.as_ref(), &bounds, &design, 8e6, DEFAULT_PENALTY);
            assert_eq!(info.status, EpisodeStatus::Ok, "{}", env.fidelity());
            assert!(r < 0.0 && r > -0.05);
        }
    }

    #[test]
    fn cp_csv_has_header_and_rows() {
        let shape = shape_with(1.0, 60);
        let r = low_fidelity_cd(&shape, 6e6, 0.0).unwrap();
        let mut buf = Vec::new();
        r.write_cp_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x,cp"));
        assert_eq!(text.lines().count(), 61);
    }
}
