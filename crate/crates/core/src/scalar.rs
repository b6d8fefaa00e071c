//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real scalar the models, datasets and calibration routines are generic over.
///
/// Implemented for `f32` and `f64`. Bit access is exposed through `u64` so the
/// same fingerprint and serialization code works for both widths.
pub trait Scalar:
    Float
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Type tag written into serialized envelopes.
    const NAME: &'static str;
    /// Significant decimal digits needed for an exact text round trip.
    const SIG_DIGITS: usize;

    fn to_bits_u64(self) -> u64;
    fn from_bits_u64(bits: u64) -> Self;

    /// Converts an `f64` constant, rounding to the nearest representable value.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
    const SIG_DIGITS: usize = 17;

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }

    fn from_bits_u64(bits: u64) -> Self {
        f64::from_bits(bits)
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
    const SIG_DIGITS: usize = 9;

    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }

    fn from_bits_u64(bits: u64) -> Self {
        f32::from_bits(bits as u32)
    }
}

/// Formats a value with `T::SIG_DIGITS` significant digits in scientific notation.
pub fn format_exact<T: Scalar>(v: T) -> String {
    format!("{:.*e}", T::SIG_DIGITS - 1, v)
}
