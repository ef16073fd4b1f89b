//! Hess–Smith panel method: constant-strength sources on every panel plus one
//! vortex strength shared by all panels, closed by the Kutta condition.

use super::linalg::{lu_solve, Matrix};
use super::AeroError;
use crate::geometry::{AirfoilShape, Point};
use crate::scalar::Real;

/// Pivot magnitude below which the influence matrix is treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSolution<T> {
    /// Panel midpoints, in the shape's point order.
    pub collocation: Vec<Point<T>>,
    pub lengths: Vec<T>,
    /// Signed tangential velocity along each panel's direction, `V∞ = 1`.
    pub vt: Vec<T>,
    pub cp: Vec<T>,
    pub sigma: Vec<T>,
    /// Shared vortex strength, counter-clockwise positive.
    pub gamma: T,
    pub cl: T,
}

struct Panel<T> {
    start: Point<T>,
    len: T,
    cos: T,
    sin: T,
}

impl<T: Real> Panel<T> {
    fn new(a: Point<T>, b: Point<T>) -> Self {
        let len = a.dist(b);
        Self { start: a, len, cos: (b.x - a.x) / len, sin: (b.y - a.y) / len }
    }

    fn midpoint(&self) -> Point<T> {
        let h = T::lit(0.5) * self.len;
        Point::new(self.start.x + h * self.cos, self.start.y + h * self.sin)
    }

    /// Velocities induced at `p` by unit source and unit vortex densities on
    /// this panel, in global coordinates: `(source, vortex)`.
    fn induced(&self, p: Point<T>, own: bool) -> (Point<T>, Point<T>) {
        let two_pi = T::TAU();
        let (ul, vl) = if own {
            (T::zero(), T::lit(0.5))
        } else {
            let dx = p.x - self.start.x;
            let dy = p.y - self.start.y;
            let xl = dx * self.cos + dy * self.sin;
            let yl = -dx * self.sin + dy * self.cos;
            let r1 = xl * xl + yl * yl;
            let xe = xl - self.len;
            let r2 = xe * xe + yl * yl;
            let subtended = (yl * self.len).atan2(xl * xe + yl * yl);
            (T::lit(0.5) * (r1 / r2).ln() / two_pi, subtended / two_pi)
        };
        // the vortex field is the source field rotated a quarter turn
        let (uv, vv) = (-vl, ul);
        let to_global = |u: T, v: T| Point::new(u * self.cos - v * self.sin, u * self.sin + v * self.cos);
        (to_global(ul, vl), to_global(uv, vv))
    }
}

fn dot<T: Real>(a: Point<T>, b: Point<T>) -> T {
    a.x * b.x + a.y * b.y
}

/// Solves the lifting problem at angle of attack `alpha` (radians).
pub fn solve_panel<T: Real>(shape: &AirfoilShape<T>, alpha: T) -> Result<PanelSolution<T>, AeroError> {
    if !shape.is_valid() {
        return Err(AeroError::InvalidShape);
    }
    solve(shape.points(), alpha, true)
}

/// Source-only solution without the Kutta condition (zero circulation).
///
/// Intended for closed bluff bodies such as the circular cylinder check.
pub fn solve_panel_nonlifting<T: Real>(points: &[Point<T>], alpha: T) -> Result<PanelSolution<T>, AeroError> {
    solve(points, alpha, false)
}

fn solve<T: Real>(points: &[Point<T>], alpha: T, lifting: bool) -> Result<PanelSolution<T>, AeroError> {
    let n = points.len().saturating_sub(1);
    if n < 3 {
        return Err(AeroError::TooFewPanels(n));
    }
    let panels: Vec<Panel<T>> = points.windows(2).map(|w| Panel::new(w[0], w[1])).collect();
    if panels.iter().any(|p| !(p.len > T::zero())) {
        return Err(AeroError::InvalidShape);
    }
    let colloc: Vec<Point<T>> = panels.iter().map(Panel::midpoint).collect();
    let normal = |p: &Panel<T>| Point::new(-p.sin, p.cos);
    let tangent = |p: &Panel<T>| Point::new(p.cos, p.sin);
    let freestream = Point::new(alpha.cos(), alpha.sin());

    // tangential influence rows are kept for the post-processing pass
    let mut src_t = vec![T::zero(); n * n];
    let mut vtx_t = vec![T::zero(); n];
    let dim = if lifting { n + 1 } else { n };
    let mut a = Matrix::zeros(dim);
    let mut rhs = vec![T::zero(); dim];

    for (i, pi) in panels.iter().enumerate() {
        let (ni, ti) = (normal(pi), tangent(pi));
        let mut vortex_n = T::zero();
        let mut vortex_t = T::zero();
        for (j, pj) in panels.iter().enumerate() {
            let (s, v) = pj.induced(colloc[i], i == j);
            a.set(i, j, dot(s, ni));
            src_t[i * n + j] = dot(s, ti);
            vortex_n = vortex_n + dot(v, ni);
            vortex_t = vortex_t + dot(v, ti);
        }
        vtx_t[i] = vortex_t;
        rhs[i] = -dot(freestream, ni);
        if lifting {
            a.set(i, n, vortex_n);
        }
    }
    if lifting {
        // Kutta: equal and opposite tangential speed on the two trailing-edge panels
        let last = n - 1;
        for j in 0..n {
            a.set(n, j, src_t[j] + src_t[last * n + j]);
        }
        a.set(n, n, vtx_t[0] + vtx_t[last]);
        rhs[n] = -(dot(freestream, tangent(&panels[0])) + dot(freestream, tangent(&panels[last])));
    }

    let x = lu_solve(a, &rhs, T::lit(SINGULAR_PIVOT)).map_err(AeroError::Solver)?;
    let sigma = x[..n].to_vec();
    let gamma = if lifting { x[n] } else { T::zero() };

    let vt: Vec<T> = (0..n)
        .map(|i| {
            let s: T = (0..n).map(|j| src_t[i * n + j] * sigma[j]).sum();
            s + gamma * vtx_t[i] + dot(freestream, tangent(&panels[i]))
        })
        .collect();
    let cp: Vec<T> = vt.iter().map(|&v| T::one() - v * v).collect();
    let lengths: Vec<T> = panels.iter().map(|p| p.len).collect();
    let perimeter: T = lengths.iter().copied().sum();
    let xs = points.iter().map(|p| p.x);
    let chord = xs.clone().fold(T::neg_infinity(), T::max) - xs.fold(T::infinity(), T::min);
    // Kutta–Joukowski with clockwise-positive circulation −γ·perimeter
    let cl = -T::lit(2.0) * gamma * perimeter / chord;
    if !(cl.is_finite() && cp.iter().all(|c| c.is_finite())) {
        return Err(AeroError::NonFinite);
    }
    Ok(PanelSolution { collocation: colloc, lengths, vt, cp, sigma, gamma, cl })
}
