//! Scalar abstractions.
//!
//! Probability and score arithmetic runs on any IEEE float ([`Real`]). The
//! uncertainty bound algebra only needs field operations and ordering
//! ([`BoundScalar`]), so it also runs on exact rationals.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Floating point type used for probabilities, scores and thresholds.
pub trait Real:
    Float + Signed + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for configuration constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + Signed
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Ordered field used by the uncertainty bounds: `f32`, `f64`, or a
/// `num_rational::Ratio` over a signed integer.
pub trait BoundScalar: Num + Signed + Copy + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> BoundScalar for T where T: Num + Signed + Copy + PartialOrd + FromPrimitive + Debug {}
