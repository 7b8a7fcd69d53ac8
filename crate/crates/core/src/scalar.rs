//! Real-number abstraction shared by the geometry, matching, reward and
//! metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value cannot be
    /// represented, which never happens for finite `f32`/`f64` inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `num / max(den, eps)`, the guarded ratio used throughout the reward terms.
#[inline]
pub fn guarded_ratio<T: Scalar>(num: T, den: T, eps: T) -> T {
    num / den.max(eps)
}

/// Harmonic mean of precision and recall, `0` when both are `0`.
#[inline]
pub fn harmonic<T: Scalar>(p: T, r: T) -> T {
    let s = p + r;
    if s > T::zero() {
        (p + p) * r / s
    } else {
        T::zero()
    }
}
