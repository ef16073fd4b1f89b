//! Bézier airfoil parameterization.
//!
//! A 13-entry normalized design vector maps affinely onto a control polygon
//! (three free upper points, three free lower points, a leading-edge radius),
//! which [`build_airfoil`] samples into a closed, validated surface polyline.

mod airfoil;
mod bezier;

pub use airfoil::{build_airfoil, read_selig, write_selig, AirfoilShape, BuildOptions};
pub use bezier::bezier_eval;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Number of design variables: six (x, y) control points and the leading-edge radius.
pub const DESIGN_DIM: usize = 13;

/// Index of the leading-edge radius inside a [`DesignVector`].
pub const RADIUS_INDEX: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("design entry {index} = {value} is outside [-1, 1] or not finite")]
    InvalidAction { index: usize, value: f64 },
    #[error("design vector must have {DESIGN_DIM} entries, got {0}")]
    WrongLength(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self { x: T::zero(), y: T::zero() }
    }

    pub fn mirrored(self) -> Self {
        Self { x: self.x, y: -self.y }
    }

    pub fn dist(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Normalized action: 13 entries in `[-1, 1]`.
///
/// Layout: `[ux1, uy1, ux2, uy2, ux3, uy3, lx1, ly1, lx2, ly2, lx3, ly3, r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignVector<T> {
    values: [T; DESIGN_DIM],
}

impl<T: Real> DesignVector<T> {
    pub fn new(values: [T; DESIGN_DIM]) -> Result<Self, GeometryError> {
        for (index, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v >= -T::one() && v <= T::one()) {
                return Err(GeometryError::InvalidAction { index, value: v.to_f64_lossy() });
            }
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[T]) -> Result<Self, GeometryError> {
        let arr: [T; DESIGN_DIM] =
            values.try_into().map_err(|_| GeometryError::WrongLength(values.len()))?;
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        Self { values: [T::zero(); DESIGN_DIM] }
    }

    pub fn values(&self) -> &[T; DESIGN_DIM] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> Interval<T> {
    pub fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    fn from_unit(&self, v: T) -> T {
        let half = T::lit(0.5);
        self.min + (v + T::one()) * half * (self.max - self.min)
    }

    fn to_unit(&self, p: T) -> T {
        T::lit(2.0) * (p - self.min) / (self.max - self.min) - T::one()
    }
}

/// Geometric range for every design variable, in [`DesignVector`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryBounds<T> {
    pub ranges: [Interval<T>; DESIGN_DIM],
}

impl<T: Real> Default for GeometryBounds<T> {
    /// Control-point abscissae get disjoint sub-ranges of [0.05, 0.95] so they stay
    /// ordered for every action.
    fn default() -> Self {
        let iv = |a: f64, b: f64| Interval::new(T::lit(a), T::lit(b));
        let xs = [iv(0.05, 0.35), iv(0.35, 0.65), iv(0.65, 0.95)];
        let up = iv(0.0, 0.25);
        let lo = iv(-0.25, 0.0);
        Self {
            ranges: [
                xs[0], up, xs[1], up, xs[2], up, //
                xs[0], lo, xs[1], lo, xs[2], lo, //
                iv(0.002, 0.05),
            ],
        }
    }
}

impl<T: Real> GeometryBounds<T> {
    /// Default ranges with every control ordinate kept at least `floor` off
    /// the chord line, so no decoded design collapses to a flat plate.
    pub fn with_ordinate_floor(floor: T) -> Self {
        let mut b = Self::default();
        for i in [1, 3, 5] {
            b.ranges[i].min = floor;
        }
        for i in [7, 9, 11] {
            b.ranges[i].max = -floor;
        }
        b
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (i, r) in self.ranges.iter().enumerate() {
            if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max) {
                return Err(GeometryError::Config(format!(
                    "bound {i} must be finite with min < max, got [{}, {}]",
                    r.min, r.max
                )));
            }
        }
        for i in [0, 2, 4, 6, 8, 10] {
            let r = self.ranges[i];
            if r.min < T::zero() || r.max > T::one() {
                return Err(GeometryError::Config(format!(
                    "abscissa bound {i} must lie within [0, 1], got [{}, {}]",
                    r.min, r.max
                )));
            }
        }
        if self.ranges[RADIUS_INDEX].min <= T::zero() {
            return Err(GeometryError::Config("leading-edge radius bound must be > 0".into()));
        }
        Ok(())
    }
}

/// Free control points plus leading-edge radius. The fixed endpoints (0,0) and
/// (1,0) are implied and added by [`ControlPolygon::upper_curve`] / [`ControlPolygon::lower_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPolygon<T> {
    pub upper: [Point<T>; 3],
    pub lower: [Point<T>; 3],
    pub leading_edge_radius: T,
}

impl<T: Real> ControlPolygon<T> {
    pub fn leading_edge() -> Point<T> {
        Point::origin()
    }

    pub fn trailing_edge() -> Point<T> {
        Point::new(T::one(), T::zero())
    }

    pub fn upper_curve(&self) -> [Point<T>; 5] {
        let [a, b, c] = self.upper;
        [Self::leading_edge(), a, b, c, Self::trailing_edge()]
    }

    pub fn lower_curve(&self) -> [Point<T>; 5] {
        let [a, b, c] = self.lower;
        [Self::leading_edge(), a, b, c, Self::trailing_edge()]
    }

    /// Lower surface replaced by the mirror image of the upper one.
    pub fn symmetrized(&self) -> Self {
        Self { lower: self.upper.map(Point::mirrored), ..*self }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for p in self.upper.iter().chain(self.lower.iter()) {
            if !p.is_finite() || p.x < T::zero() || p.x > T::one() {
                return Err(GeometryError::Domain(format!(
                    "control point ({}, {}) must be finite with x in [0, 1]",
                    p.x, p.y
                )));
            }
        }
        let r = self.leading_edge_radius;
        if !(r.is_finite() && r > T::zero()) {
            return Err(GeometryError::Domain(format!("leading-edge radius {r} must be > 0")));
        }
        Ok(())
    }
}

/// Maps a normalized design vector affinely onto the configured geometric ranges.
pub fn decode<T: Real>(
    design: &DesignVector<T>,
    bounds: &GeometryBounds<T>,
) -> Result<ControlPolygon<T>, GeometryError> {
    bounds.validate()?;
    // re-check: DesignVector may have been built through a path that skipped `new`
    let v = DesignVector::new(design.values)?.values;
    let m: [T; DESIGN_DIM] = std::array::from_fn(|i| bounds.ranges[i].from_unit(v[i]));
    let poly = ControlPolygon {
        upper: [Point::new(m[0], m[1]), Point::new(m[2], m[3]), Point::new(m[4], m[5])],
        lower: [Point::new(m[6], m[7]), Point::new(m[8], m[9]), Point::new(m[10], m[11])],
        leading_edge_radius: m[RADIUS_INDEX],
    };
    poly.validate()?;
    Ok(poly)
}

/// Inverse of [`decode`]: recovers the normalized entries of a polygon.
///
/// The result is not range-checked; polygons outside the bounds box map
/// outside `[-1, 1]`.
pub fn encode<T: Real>(poly: &ControlPolygon<T>, bounds: &GeometryBounds<T>) -> [T; DESIGN_DIM] {
    let flat = [
        poly.upper[0].x,
        poly.upper[0].y,
        poly.upper[1].x,
        poly.upper[1].y,
        poly.upper[2].x,
        poly.upper[2].y,
        poly.lower[0].x,
        poly.lower[0].y,
        poly.lower[1].x,
        poly.lower[1].y,
        poly.lower[2].x,
        poly.lower[2].y,
        poly.leading_edge_radius,
    ];
    std::array::from_fn(|i| bounds.ranges[i].to_unit(flat[i]))
}
