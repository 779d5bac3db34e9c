//! Floating point scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type: `f32` or `f64`.
///
/// `Display` must print the shortest representation that parses back to the
/// same value; checkpoints rely on it for bit-exact round trips.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + ScalarOperand
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance below which a negative squared RKHS norm is treated as rounding noise.
    #[inline]
    fn sq_norm_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
