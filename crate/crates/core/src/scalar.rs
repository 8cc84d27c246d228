//! Scalar abstractions shared by every module.
//!
//! Two tiers are used. [`Scalar`] only needs ring arithmetic and ordering, so
//! exact rationals qualify; it backs the purely algebraic operations (masking,
//! composition, attention scaling, block means). [`Real`] adds the float
//! transcendental functions needed by filtering, softmax, sampling and SSIM.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ring-like scalar with a total-enough order for range checks.
pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Send + Sync + FromPrimitive + ToPrimitive + 'static
{
    /// `false` for NaN and infinities; always `true` for exact types.
    fn is_finite_value(self) -> bool;

    /// Converts a small literal, panicking only if the type cannot hold it.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// 0 or 1 as a scalar.
    #[inline]
    fn indicator(bit: bool) -> Self {
        if bit {
            Self::one()
        } else {
            Self::zero()
        }
    }
}

/// Floating-point scalar.
pub trait Real: Scalar + Float + Sum + Display {}

impl Scalar for f32 {
    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

impl Scalar for Ratio<i64> {
    #[inline]
    fn is_finite_value(self) -> bool {
        true
    }
}

impl Scalar for Ratio<i128> {
    #[inline]
    fn is_finite_value(self) -> bool {
        true
    }
}
