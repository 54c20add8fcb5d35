//! Scalar abstraction for the numeric core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the numeric modules are generic over.
///
/// `f64` is the default everywhere in the harness; `f32` is supported for
/// memory-constrained runs.
pub trait Scalar:
    Float
    + FromPrimitive
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::ops::DivAssign
    + core::iter::Sum
    + core::fmt::Debug
    + core::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand cast from an `f64` literal or config value.
#[inline]
pub fn sc<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 -> scalar cast")
}
