//! Scalar abstraction: the whole library is generic over the floating point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar usable throughout the library (f32 or f64).
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for lifting an f64 literal into the generic scalar type.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}

/// Lift a usize count into the scalar type.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count not representable in scalar type")
}
