use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type for features, activations and decoder weights.
///
/// Implemented for `f32` and `f64`. ndarray routes matrix products on both
/// through its packed GEMM kernels, so generic code keeps full speed.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Number of bytes in the in-memory representation.
    const BYTES: usize;

    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite conversion")
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize conversion")
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;
}

impl Scalar for f64 {
    const BYTES: usize = 8;
}
