//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;
use num_traits as nt;

/// Real floating point scalar: `f32` or `f64`.
///
/// Everything in the crate is written against this trait. The tolerances the
/// verification routines are calibrated for assume `f64`.
pub trait Real:
    na::RealField + Copy + Default + nt::FromPrimitive + nt::ToPrimitive + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        na::convert(x)
    }

    /// Lossy conversion back to `f64`, used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Largest absolute entry of a slice, `0` for an empty slice.
#[allow(dead_code)]
pub(crate) fn max_abs<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
