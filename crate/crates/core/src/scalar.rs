//! Scalar abstraction: all continuous quantities (times, speeds, potentials,
//! weights) are generic over a floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: f32 or f64.
///
/// `Display`/`FromStr` round-trip bit-exactly for both types (shortest
/// decimal representation), which the text file formats rely on.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + FromStr
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand conversion from an f64 constant.
#[inline]
pub fn r64<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("f64 constant representable in scalar type")
}

/// Conversion from usize (segment counts, hop counts).
#[inline]
pub fn rus<S: Real>(x: usize) -> S {
    S::from_usize(x).expect("usize representable in scalar type")
}
