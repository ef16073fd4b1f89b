//! Scalar abstraction shared by every numeric module.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the geometry, flow solvers and networks are written against.
///
/// Implemented for `f32` and `f64`. Training defaults to `f64`; the acceptance
/// gradient checks depend on it.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Type name recorded in checkpoints.
    const NAME: &'static str;

    /// Converts an `f64` literal. Never fails for finite input.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
