//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the solver is generic over (`f32` or `f64`).
///
/// Besides the arithmetic bounds, each implementation fixes the handful of
/// precision-dependent thresholds the solver needs, so that algorithms never
/// hard-code a double-precision constant.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Agreement threshold for operations that are exact up to rounding
    /// (Plancherel identity, discarded imaginary residue, round trips).
    fn exactness_tol() -> Self;

    /// Relative half-width of the neighbourhood of `b^2/4 - m^2 - lambda^2 = 0`
    /// in which the propagators switch to their Taylor expansions.
    fn degenerate_band() -> Self;

    /// Magnitudes below this are treated as exact zeros by `|u|^p`.
    fn underflow_cutoff() -> Self;

    /// Converts an `f64` literal; every `f64` is representable in the
    /// supported types up to rounding.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    fn exactness_tol() -> Self {
        1e-12
    }
    fn degenerate_band() -> Self {
        1e-8
    }
    fn underflow_cutoff() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    fn exactness_tol() -> Self {
        1e-4
    }
    fn degenerate_band() -> Self {
        1e-3
    }
    fn underflow_cutoff() -> Self {
        1e-35
    }
}
