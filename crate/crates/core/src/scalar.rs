//! Scalar abstraction for the numeric kernels.
//!
//! Everything in this crate is generic over [`Scalar`] so the same kernels
//! serve `f32` and `f64`. The solvers and experiment harness run in `f64`
//! (see the aliases at the crate root): the plan discrepancies they report
//! are around 1e-14, which a 24-bit mantissa cannot resolve.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by all kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Display + Debug + Send + Sync + 'static
{
    /// Lossless conversion from `f64` literals used for defaults and guards.
    ///
    /// Values that underflow the target type (e.g. 1e-300 into `f32`) fall
    /// back to the smallest positive normal instead of zero.
    fn from_config(value: f64) -> Self {
        match Self::from_f64(value) {
            Some(v) if v != Self::zero() || value == 0.0 => v,
            _ => Self::min_positive_value(),
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_config_underflow_falls_back_to_min_positive() {
        let v = f32::from_config(1e-300);
        assert!(v > 0.0);
        assert_eq!(f64::from_config(1e-300), 1e-300);
        assert_eq!(f64::from_config(0.0), 0.0);
    }
}
