use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numerical core is generic over. Implemented for `f32` and `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("f64 literal representable")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    <T as ToPrimitive>::to_f64(&x).unwrap_or(f64::NAN)
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    lit(n as f64)
}

#[inline]
pub fn nan<T: Real>() -> T {
    lit(f64::NAN)
}
