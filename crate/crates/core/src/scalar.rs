//! Scalar abstraction shared by every numeric module.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar: `f32` or `f64`.
///
/// Everything in the crate is written against this trait. Tolerances that
/// only make sense in double precision are expressed through [`Real::eps_scale`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative rounding scale used for geometric containment slack.
    fn eps_scale() -> Self;

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {
    #[inline]
    fn eps_scale() -> Self {
        1e-5
    }
}

impl Real for f64 {
    #[inline]
    fn eps_scale() -> Self {
        1e-12
    }
}

/// Serde adapter writing `+∞` as `null` (JSON has no infinity).
pub mod unbounded {
    use super::Real;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Real, S: Serializer>(v: &T, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > T::zero() {
            None::<f64>.serialize(ser)
        } else {
            Some(v.as_f64()).serialize(ser)
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(de: D) -> Result<T, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.map_or(T::infinity(), T::of))
    }
}
