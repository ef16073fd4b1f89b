use super::{GeometryError, Point};
use crate::scalar::Real;

/// Evaluates a Bézier curve at parameter `t` by de Casteljau subdivision.
///
/// Algebraically identical to the Bernstein sum `Σ C(n,i) tⁱ(1−t)ⁿ⁻ⁱ Pᵢ`; the
/// repeated convex combinations keep every intermediate point inside the
/// control hull, which is what the convex-hull property relies on.
pub fn bezier_eval<T: Real>(ctrl: &[Point<T>], t: T) -> Result<Point<T>, GeometryError> {
    if ctrl.len() < 2 {
        return Err(GeometryError::Domain(format!(
            "a Bézier curve needs at least 2 control points, got {}",
            ctrl.len()
        )));
    }
    if !(t >= T::zero() && t <= T::one()) {
        return Err(GeometryError::Domain(format!(
            "curve parameter {t} outside [0, 1]"
        )));
    }
    Ok(de_casteljau(ctrl, t))
}

/// Unchecked evaluation for callers that already validated `t`.
pub(crate) fn de_casteljau<T: Real>(ctrl: &[Point<T>], t: T) -> Point<T> {
    let mut pts = ctrl.to_vec();
    let s = T::one() - t;
    for level in (1..pts.len()).rev() {
        for i in 0..level {
            pts[i] = Point {
                x: s * pts[i].x + t * pts[i + 1].x,
                y: s * pts[i].y + t * pts[i + 1].y,
            };
        }
    }
    pts[0]
}
