//! Scalar abstraction shared by the model, policy and analysis code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar type the market math is written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Absolute slack used when validating that class weights lie on the simplex.
    fn simplex_tolerance() -> Self;

    /// Lossy conversion from a purchase count.
    #[inline]
    fn from_count(count: u64) -> Self {
        <Self as NumCast>::from(count).unwrap_or_else(Self::infinity)
    }

    /// Conversion from an `f64` literal.
    #[inline]
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn simplex_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn simplex_tolerance() -> Self {
        1e-12
    }
}
