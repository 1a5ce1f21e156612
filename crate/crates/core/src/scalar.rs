//! Floating-point scalar abstraction shared by every numeric module.
//!
//! All linear algebra goes through `nalgebra`, so the scalar bound is
//! `RealField`; conversions to and from `f64` come from `num-traits`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used by the numeric core: `f32` or `f64`.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned + Default
{
    /// Smallest tolerance that is meaningful for this type.
    fn tolerance_floor() -> Self;
}

impl Scalar for f64 {
    fn tolerance_floor() -> Self {
        1e3 * f64::EPSILON
    }
}

impl Scalar for f32 {
    fn tolerance_floor() -> Self {
        1e3 * f32::EPSILON
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `T` back to `f64`.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

/// A tolerance given in `f64` terms, floored at what `T` can resolve.
#[inline]
pub fn tol<T: Scalar>(x: f64) -> T {
    let t = lit::<T>(x);
    if t < T::tolerance_floor() {
        T::tolerance_floor()
    } else {
        t
    }
}

#[inline]
pub fn from_usize<T: Scalar>(x: usize) -> T {
    T::from_usize(x).expect("usize representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_floored_for_f32() {
        assert_eq!(tol::<f64>(1e-12), 1e-12);
        assert!(tol::<f32>(1e-12) > 1e-5);
    }
}
