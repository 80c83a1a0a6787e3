//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum<Self>
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal or intermediate into the working scalar.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 value representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn real_usize<F: Real>(n: usize) -> F {
    F::from_usize(n).expect("count representable in scalar type")
}

/// Widens the working scalar back to `f64` (used at RNG and I/O boundaries).
#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

/// Formats a scalar in scientific notation with `sig` significant digits.
///
/// Used by the text serializers so that files re-load to the same decimal.
pub fn fmt_sig<F: Real>(x: F, sig: usize) -> String {
    format!("{:.*e}", sig.saturating_sub(1), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_round_trips_at_declared_precision() {
        let x = 0.123456789f64;
        let s = fmt_sig(x, 6);
        let y: f64 = s.parse().unwrap();
        assert_eq!(fmt_sig(y, 6), s);
    }

    #[test]
    fn real_conversions() {
        assert_eq!(real::<f64>(0.5), 0.5);
        assert_eq!(real_usize::<f32>(3), 3.0f32);
        assert_eq!(to_f64(0.25f32), 0.25);
    }
}
