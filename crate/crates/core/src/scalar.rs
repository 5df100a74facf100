//! Scalar abstraction for the numeric kernel.
//!
//! Lattice geometry is exact integer arithmetic throughout and never goes
//! through this trait. Everything continuous (log-domain weights, solvers,
//! dynamic programming, fits) is generic over [`Scalar`] so the kernel can be
//! instantiated at `f32` or `f64`. The crate root fixes [`crate::Real`] = `f64`
//! for the public API and all experiments.

use num_traits::{Float, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for lossy conversion from `f64` literals.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
