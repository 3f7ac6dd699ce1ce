//! Floating scalar abstraction for the numeric kernels.
//!
//! Exact geometry lives in [`crate::rational`]; everything downstream of the
//! linear algebra (energies, solves, seminorms) is generic over a float type.

use crate::rational::Ratio;
use num_traits::ToPrimitive;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Nearest representable value of an exact rational.
    fn from_ratio(r: &Ratio) -> Self;
}

impl Scalar for f64 {
    fn from_ratio(r: &Ratio) -> Self {
        r.to_f64().expect("rational out of f64 range")
    }
}

impl Scalar for f32 {
    fn from_ratio(r: &Ratio) -> Self {
        r.to_f64().expect("rational out of f64 range") as f32
    }
}

/// Default scalar used by the experiment layers.
pub type Real = f64;
