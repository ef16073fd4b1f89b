//! Integral boundary-layer march driven by panel-method edge velocities.
//!
//! Laminar flow uses Thwaites' method with the Cebeci–Bradshaw closure,
//! transition follows Michel's criterion (or laminar separation), the
//! turbulent part integrates Head's entrainment equations with the
//! Ludwieg–Tillmann skin friction law, and the wake drag comes from the
//! Squire–Young formula at the end of each surface.

use super::panel::PanelSolution;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayerOptions<T> {
    /// Separation upstream of this chord fraction marks the evaluation non-converged.
    pub separation_cutoff: T,
    /// Head shape factor at which the turbulent layer is considered separated.
    pub turbulent_separation_h: T,
    /// Shape factor assigned at transition.
    pub transition_h: T,
    /// Runge–Kutta substeps between consecutive stations.
    pub substeps: usize,
}

impl<T: Real> Default for BoundaryLayerOptions<T> {
    fn default() -> Self {
        Self {
            separation_cutoff: T::lit(0.95),
            turbulent_separation_h: T::lit(2.4),
            transition_h: T::lit(1.4),
            substeps: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceResult<T> {
    /// Squire–Young drag contribution of this surface.
    pub cd: T,
    pub theta: T,
    pub h: T,
    pub ue: T,
    /// Chord station where the march ended.
    pub x_end: T,
    pub x_transition: Option<T>,
    /// Chord station of turbulent separation, if any.
    pub x_separation: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLayerResult<T> {
    pub upper: SurfaceResult<T>,
    pub lower: SurfaceResult<T>,
    pub cd: T,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Station<T> {
    s: T,
    x: T,
    ue: T,
}

/// Marches both surfaces at chord Reynolds number `re` and sums the
/// Squire–Young drag. Returns `None` when no stagnation point can be located.
pub fn march<T: Real>(
    sol: &PanelSolution<T>,
    re: T,
    opts: &BoundaryLayerOptions<T>,
) -> Option<BoundaryLayerResult<T>> {
    let (upper, lower) = split_at_stagnation(sol)?;
    let nu = T::one() / re;
    let up = march_surface(&upper, nu, opts)?;
    let lo = march_surface(&lower, nu, opts)?;
    let separated_early = |s: &SurfaceResult<T>| {
        s.x_separation.is_some_and(|x| x < opts.separation_cutoff)
    };
    let cd = up.cd + lo.cd;
    let converged = !separated_early(&up) && !separated_early(&lo) && cd.is_finite() && cd >= T::zero();
    Some(BoundaryLayerResult { upper: up, lower: lo, cd, converged })
}

/// Splits the collocation points at the stagnation point (where the signed
/// tangential velocity changes from negative to positive) into two surfaces,
/// each ordered downstream with arc length measured from stagnation.
fn split_at_stagnation<T: Real>(sol: &PanelSolution<T>) -> Option<(Vec<Station<T>>, Vec<Station<T>>)> {
    let n = sol.vt.len();
    let le = (0..n)
        .min_by(|&a, &b| sol.collocation[a].x.partial_cmp(&sol.collocation[b].x).unwrap())?;
    // sign change nearest to the leading edge
    let k = (0..n - 1)
        .filter(|&i| sol.vt[i] < T::zero() && sol.vt[i + 1] >= T::zero())
        .min_by_key(|&i| i.abs_diff(le))?;

    // cumulative distance between successive collocation points
    let mut cum = vec![T::zero(); n];
    for i in 1..n {
        cum[i] = cum[i - 1] + sol.collocation[i].dist(sol.collocation[i - 1]);
    }
    let (v0, v1) = (sol.vt[k], sol.vt[k + 1]);
    let frac = -v0 / (v1 - v0);
    let s_stag = cum[k] + frac * (cum[k + 1] - cum[k]);

    let upper = (k + 1..n)
        .map(|i| Station { s: cum[i] - s_stag, x: sol.collocation[i].x, ue: sol.vt[i] })
        .collect();
    let lower = (0..=k)
        .rev()
        .map(|i| Station { s: s_stag - cum[i], x: sol.collocation[i].x, ue: -sol.vt[i] })
        .collect();
    Some((upper, lower))
}

/// Cebeci–Bradshaw fit of Thwaites' closure: `(H, l)` as functions of λ.
fn thwaites_closure<T: Real>(lambda: T) -> (T, T) {
    let l = lambda.max(T::lit(-0.1)).min(T::lit(0.1));
    if l >= T::zero() {
        let h = T::lit(2.61) - T::lit(3.75) * l + T::lit(5.24) * l * l;
        let shear = T::lit(0.22) + T::lit(1.57) * l - T::lit(1.8) * l * l;
        (h, shear)
    } else {
        let h = T::lit(2.088) + T::lit(0.0731) / (l + T::lit(0.14));
        let shear = T::lit(0.22) + T::lit(1.402) * l + T::lit(0.018) * l / (l + T::lit(0.107));
        (h, shear)
    }
}

fn head_h1<T: Real>(h: T) -> T {
    if h <= T::lit(1.6) {
        T::lit(3.3) + T::lit(0.8234) * (h - T::lit(1.1)).powf(T::lit(-1.287))
    } else {
        T::lit(3.3) + T::lit(1.5501) * (h - T::lit(0.6778)).powf(T::lit(-3.064))
    }
}

/// Inverse of [`head_h1`]; `None` once H1 has dropped to the asymptote (separation).
fn head_h<T: Real>(h1: T) -> Option<T> {
    let d = h1 - T::lit(3.3);
    if !(d > T::zero()) {
        return None;
    }
    Some(if h1 >= T::lit(5.3) {
        T::lit(1.1) + T::lit(0.86) * d.powf(T::lit(-0.777))
    } else {
        T::lit(0.6778) + T::lit(1.1536) * d.powf(T::lit(-0.326))
    })
}

fn ludwieg_tillmann<T: Real>(h: T, re_theta: T) -> T {
    T::lit(0.246) * T::lit(10.0).powf(T::lit(-0.678) * h) * re_theta.max(T::lit(1.0)).powf(T::lit(-0.268))
}

fn michel_transition<T: Real>(re_x: T, re_theta: T) -> bool {
    re_theta >= T::lit(1.174) * (T::one() + T::lit(22400.0) / re_x) * re_x.powf(T::lit(0.46))
}

fn march_surface<T: Real>(st: &[Station<T>], nu: T, opts: &BoundaryLayerOptions<T>) -> Option<SurfaceResult<T>> {
    if st.len() < 3 || st.iter().any(|s| !(s.ue > T::zero()) || !(s.s > T::zero())) {
        return None;
    }
    let gradient = |k: usize| -> T {
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k + 1 == st.len() {
            (k - 1, k)
        } else {
            (k - 1, k + 1)
        };
        (st[b].ue - st[a].ue) / (st[b].s - st[a].s)
    };

    // laminar: θ² = 0.45ν/ue⁶ ∫ ue⁵ ds, ue linear from zero over the first segment
    let six = T::lit(6.0);
    let mut integral = st[0].ue.powi(5) * st[0].s / six;
    let mut theta;
    let mut h;
    let mut k = 0;
    loop {
        let s = st[k];
        if k > 0 {
            let p = st[k - 1];
            integral = integral + T::lit(0.5) * (p.ue.powi(5) + s.ue.powi(5)) * (s.s - p.s);
        }
        theta = (T::lit(0.45) * nu * integral / s.ue.powi(6)).sqrt();
        let lambda = theta * theta * gradient(k) / nu;
        h = thwaites_closure(lambda).0;
        let re_theta = s.ue * theta / nu;
        let re_x = s.ue * s.s / nu;
        if lambda < T::lit(-0.09) || michel_transition(re_x, re_theta) {
            break;
        }
        if k + 1 == st.len() {
            return Some(SurfaceResult {
                cd: squire_young(theta, h, s.ue),
                theta,
                h,
                ue: s.ue,
                x_end: s.x,
                x_transition: None,
                x_separation: None,
            });
        }
        k += 1;
    }

    // turbulent: state (θ, Y = ue·θ·H1)
    let x_transition = Some(st[k].x);
    h = opts.transition_h;
    let mut y = st[k].ue * theta * head_h1(h);
    let rhs = |ue: T, due: T, theta: T, y: T| -> Option<(T, T)> {
        let h1 = y / (ue * theta);
        let h = head_h(h1)?;
        let cf = ludwieg_tillmann(h, ue * theta / nu);
        let dtheta = T::lit(0.5) * cf - (h + T::lit(2.0)) * theta / ue * due;
        let dy = ue * T::lit(0.0306) * (h1 - T::lit(3.0)).powf(T::lit(-0.6169));
        Some((dtheta, dy))
    };
    let sub = T::lit(opts.substeps.max(1) as f64);
    while k + 1 < st.len() {
        let (a, b) = (st[k], st[k + 1]);
        let due = (b.ue - a.ue) / (b.s - a.s);
        let ds = (b.s - a.s) / sub;
        let theta_a = theta;
        let mut separated = false;
        for m in 0..opts.substeps.max(1) {
            let f0 = T::lit(m as f64) / sub;
            let f1 = T::lit(m as f64 + 1.0) / sub;
            let ue0 = a.ue + f0 * (b.ue - a.ue);
            let ue1 = a.ue + f1 * (b.ue - a.ue);
            let step = rhs(ue0, due, theta, y).and_then(|(d1t, d1y)| {
                let (tp, yp) = (theta + ds * d1t, y + ds * d1y);
                if !(tp > T::zero()) {
                    return None;
                }
                let (d2t, d2y) = rhs(ue1, due, tp, yp)?;
                Some((theta + T::lit(0.5) * ds * (d1t + d2t), y + T::lit(0.5) * ds * (d1y + d2y)))
            });
            match step {
                Some((t1, y1)) if t1 > T::zero() && t1.is_finite() && y1.is_finite() => {
                    theta = t1;
                    y = y1;
                }
                _ => {
                    separated = true;
                    break;
                }
            }
        }
        let h_next = if separated { None } else { head_h(y / (b.ue * theta)) };
        match h_next {
            Some(hn) if hn < opts.turbulent_separation_h => {
                h = hn;
                k += 1;
            }
            _ => {
                // drag is taken at the last attached station
                theta = theta_a;
                let s = st[k];
                return Some(SurfaceResult {
                    cd: squire_young(theta, h, s.ue),
                    theta,
                    h,
                    ue: s.ue,
                    x_end: s.x,
                    x_transition,
                    x_separation: Some(b.x),
                });
            }
        }
    }
    let s = st[k];
    Some(SurfaceResult {
        cd: squire_young(theta, h, s.ue),
        theta,
        h,
        ue: s.ue,
        x_end: s.x,
        x_transition,
        x_separation: None,
    })
}

fn squire_young<T: Real>(theta: T, h: T, ue: T) -> T {
    T::lit(2.0) * theta * ue.powf((h + T::lit(5.0)) / T::lit(2.0))
}
