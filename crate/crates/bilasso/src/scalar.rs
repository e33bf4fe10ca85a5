//! Scalar abstraction for the numeric kernels.
//!
//! The pure-math operations (log densities, penalty norms, proximal maps,
//! the FISTA loop) are generic over [`Real`] so they work at `f32` or `f64`.
//! The samplers and LAPACK-backed paths instantiate everything at `f64`.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable in the generic kernels: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::iter::Sum
    + std::fmt::Display
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
