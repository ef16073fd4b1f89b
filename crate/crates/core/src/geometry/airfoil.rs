use std::io::{self, BufRead, Write};

use super::bezier::de_casteljau;
use super::{ControlPolygon, GeometryError, Point};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Total surface panel count; each surface gets `n_points / 2` panels.
    pub n_points: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { n_points: 60 }
    }
}

impl BuildOptions {
    pub fn with_points(n_points: usize) -> Self {
        Self { n_points }
    }
}

/// Closed discrete airfoil surface.
///
/// Points run trailing edge → lower surface → leading edge → upper surface →
/// trailing edge; the first and last points coincide. Geometric degeneracy is
/// reported through [`AirfoilShape::is_valid`], never as an error.
#[derive(Debug, Clone, PartialEq)]
pub struct AirfoilShape<T> {
    points: Vec<Point<T>>,
    le_index: usize,
    valid: bool,
    thickness_min: T,
    thickness_max: T,
}

impl<T: Real> AirfoilShape<T> {
    /// Wraps an arbitrary closed polyline in the internal ordering.
    ///
    /// The leading edge is taken as the first point of minimum abscissa.
    pub fn from_points(points: Vec<Point<T>>) -> Result<Self, GeometryError> {
        if points.len() < 4 {
            return Err(GeometryError::Config(format!(
                "a closed surface needs at least 4 points, got {}",
                points.len()
            )));
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if !(first.dist(last) <= T::lit(1e-12)) {
            return Err(GeometryError::Domain("surface polyline is not closed".into()));
        }
        let le_index = points
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.x < points[best].x { i } else { best });
        Ok(Self::analyzed(points, le_index))
    }

    fn analyzed(points: Vec<Point<T>>, le_index: usize) -> Self {
        let (valid, thickness_min, thickness_max) = analyze(&points, le_index);
        Self { points, le_index, valid, thickness_min, thickness_max }
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn panel_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn leading_edge_index(&self) -> usize {
        self.le_index
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// Smallest upper-minus-lower ordinate over the interior stations.
    pub fn thickness_min(&self) -> T {
        self.thickness_min
    }

    /// Largest upper-minus-lower ordinate over the interior stations.
    pub fn thickness_max(&self) -> T {
        self.thickness_max
    }

    /// Maximum thickness divided by chord.
    pub fn thickness_ratio(&self) -> T {
        self.thickness_max / self.chord()
    }

    pub fn chord(&self) -> T {
        self.points[0].x - self.points[self.le_index].x
    }

    /// Lower surface ordered leading edge → trailing edge.
    pub fn lower_surface(&self) -> Vec<Point<T>> {
        self.points[..=self.le_index].iter().rev().copied().collect()
    }

    /// Upper surface ordered leading edge → trailing edge.
    pub fn upper_surface(&self) -> Vec<Point<T>> {
        self.points[self.le_index..].to_vec()
    }
}

/// Samples the control polygon into a closed surface with `n_points` panels.
pub fn build_airfoil<T: Real>(
    polygon: &ControlPolygon<T>,
    opts: &BuildOptions,
) -> Result<AirfoilShape<T>, GeometryError> {
    if opts.n_points < 40 || opts.n_points % 2 != 0 {
        return Err(GeometryError::Config(format!(
            "n_points must be an even number >= 40, got {}",
            opts.n_points
        )));
    }
    polygon.validate()?;

    let half = opts.n_points / 2;
    let r = polygon.leading_edge_radius;
    let upper = sample_surface(&polygon.upper_curve(), half, r, T::one());
    let lower = sample_surface(&polygon.lower_curve(), half, r, -T::one());

    let mut points = Vec::with_capacity(opts.n_points + 1);
    points.extend(lower.iter().rev());
    points.extend(upper.iter().skip(1));
    Ok(AirfoilShape::analyzed(points, half))
}

/// Leading-edge geometry of one surface in "upper" orientation: the nose
/// circle through the origin centred on the chord, joined to the curve by
/// their common tangent.
struct Nose<T> {
    r: T,
    /// Where the tangent leaves the circle.
    circle_end: Point<T>,
    /// Where the tangent touches the curve.
    curve_start: Point<T>,
}

impl<T: Real> Nose<T> {
    /// Upper hull of the circle and the rising part of `curve`; `None` when the
    /// curve never rises above the chord.
    fn fit(curve: &[Point<T>], r: T) -> Option<Self> {
        let half = T::lit(0.5);
        let peak = curve.iter().fold(T::neg_infinity(), |m, p| m.max(p.y));
        // a circle taller than the surface has no tangent on the rising side
        let r = r.min(half * peak);
        if !(r > T::zero()) {
            return None;
        }
        let support = |th: T| {
            let (c, s) = (th.cos(), th.sin());
            let (k, h) = curve.iter().enumerate().fold((0, T::neg_infinity()), |best, (k, p)| {
                let h = p.x * c + p.y * s;
                if h > best.1 {
                    (k, h)
                } else {
                    best
                }
            });
            (k, h - r * (T::one() + c))
        };
        // sweep the outward normal from -x towards +y; the first angle at which
        // the curve reaches the circle's support line fixes the tangent
        let steps = 128;
        let angle = |i: usize| T::PI() - T::FRAC_PI_2() * T::lit(i as f64) / T::lit(steps as f64);
        let first = (1..=steps).find(|&i| support(angle(i)).1 > T::zero())?;
        let (mut hi, mut lo) = (angle(first - 1), angle(first));
        for _ in 0..60 {
            let mid = half * (hi + lo);
            if support(mid).1 > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let th = lo;
        let circle_end = Point::new(r * (T::one() + th.cos()), r * th.sin());
        let curve_start = curve[support(th).0];
        Some(Self { r, circle_end, curve_start })
    }

    /// Hull ordinate at `x`, or `None` aft of the tangent point.
    fn ordinate(&self, x: T) -> Option<T> {
        if x <= self.circle_end.x {
            Some((x * (self.r + self.r - x)).max(T::zero()).sqrt())
        } else if x < self.curve_start.x {
            let (a, b) = (self.circle_end, self.curve_start);
            Some(a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y))
        } else {
            None
        }
    }
}

/// Cosine-clustered (in `t`) samples of one surface, leading edge first.
///
/// Ahead of the tangent point the ordinates come from the nose hull of
/// [`Nose::fit`]; abscissae are the curve's own, so the monotonicity check
/// still sees the raw parameterization.
fn sample_surface<T: Real>(ctrl: &[Point<T>], panels: usize, r: T, sign: T) -> Vec<Point<T>> {
    let half = T::lit(0.5);
    let flipped: Vec<Point<T>> = ctrl.iter().map(|p| Point::new(p.x, sign * p.y)).collect();
    let cosine = |j: usize, n: usize| half * (T::one() - (T::PI() * T::lit(j as f64) / T::lit(n as f64)).cos());

    let dense: Vec<Point<T>> = (0..=512).map(|j| de_casteljau(&flipped, cosine(j, 512))).collect();
    let nose = Nose::fit(&dense, r);

    let mut pts: Vec<Point<T>> = (0..=panels).map(|j| de_casteljau(&flipped, cosine(j, panels))).collect();
    // exact endpoints regardless of rounding in the cosine
    pts[0] = flipped[0];
    pts[panels] = flipped[flipped.len() - 1];
    if let Some(nose) = nose {
        for p in pts.iter_mut().take(panels) {
            match nose.ordinate(p.x) {
                Some(y) => p.y = y,
                None => break,
            }
        }
    }
    for p in &mut pts {
        p.y = sign * p.y;
    }
    pts
}

/// Returns `(valid, thickness_min, thickness_max)`.
fn analyze<T: Real>(points: &[Point<T>], le: usize) -> (bool, T, T) {
    let zero = T::zero();
    if points.iter().any(|p| !p.is_finite()) || le == 0 || le + 1 >= points.len() {
        return (false, zero, zero);
    }
    let lower: Vec<Point<T>> = points[..=le].iter().rev().copied().collect();
    let upper = &points[le..];
    let increasing = |s: &[Point<T>]| s.windows(2).all(|w| w[1].x > w[0].x);
    if !increasing(&lower) || !increasing(upper) {
        return (false, zero, zero);
    }

    let mut tmin = T::infinity();
    let mut tmax = T::neg_infinity();
    for p in &upper[1..upper.len() - 1] {
        if let Some(yl) = interp(&lower, p.x) {
            let t = p.y - yl;
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
    }
    for p in &lower[1..lower.len() - 1] {
        if let Some(yu) = interp(upper, p.x) {
            let t = yu - p.y;
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
    }
    if !tmin.is_finite() {
        return (false, zero, zero);
    }
    let valid = tmin > zero && !self_intersects(points);
    (valid, tmin, tmax)
}

/// Linear interpolation on a surface with strictly increasing abscissae.
fn interp<T: Real>(surface: &[Point<T>], x: T) -> Option<T> {
    let n = surface.len();
    if x < surface[0].x || x > surface[n - 1].x {
        return None;
    }
    let hi = surface.partition_point(|p| p.x < x).clamp(1, n - 1);
    let (a, b) = (surface[hi - 1], surface[hi]);
    let w = (x - a.x) / (b.x - a.x);
    Some(a.y + w * (b.y - a.y))
}

fn orient<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross<T: Real>(p1: Point<T>, p2: Point<T>, q1: Point<T>, q2: Point<T>) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let zero = T::zero();
    ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero))
        && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero))
}

fn self_intersects<T: Real>(points: &[Point<T>]) -> bool {
    let n = points.len() - 1;
    for i in 0..n {
        // bounding-box prefilter keeps the pair scan cheap
        let (a, b) = (points[i], points[i + 1]);
        let (ax0, ax1) = (a.x.min(b.x), a.x.max(b.x));
        let (ay0, ay1) = (a.y.min(b.y), a.y.max(b.y));
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // share the closing trailing-edge point
            }
            let (c, d) = (points[j], points[j + 1]);
            if c.x.max(d.x) < ax0 || c.x.min(d.x) > ax1 || c.y.max(d.y) < ay0 || c.y.min(d.y) > ay1 {
                continue;
            }
            if segments_cross(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Writes two-column coordinates in Selig order (trailing edge → upper →
/// leading edge → lower → trailing edge), one point per line.
pub fn write_selig<T: Real, W: Write>(shape: &AirfoilShape<T>, mut out: W) -> io::Result<()> {
    for p in shape.points().iter().rev() {
        writeln!(out, "{:.12} {:.12}", p.x, p.y)?;
    }
    Ok(())
}

/// Reads a Selig-ordered coordinate file back into the internal ordering.
pub fn read_selig<T: Real, R: BufRead>(input: R) -> Result<AirfoilShape<T>, GeometryError> {
    let mut pts = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| GeometryError::Config(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace().map(str::parse::<T>);
        match (cols.next(), cols.next(), cols.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => pts.push(Point::new(x, y)),
            _ => {
                return Err(GeometryError::Config(format!(
                    "line {}: expected two numeric columns",
                    lineno + 1
                )))
            }
        }
    }
    pts.reverse();
    AirfoilShape::from_points(pts)
}
