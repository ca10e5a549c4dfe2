//! Scalar abstraction for all numeric kernels.
//!
//! Every numeric operation in this crate is generic over [`Scalar`] so the
//! same kernels run in `f32` or `f64`. Wire formats pin their own precision
//! (MSW1 stores IEEE-754 binary32) independently of the compute type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the pipeline: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Decimal digits that reproduce any value of this type bit-exactly on
    /// re-parse (9 for binary32, 17 for binary64).
    const EXACT_SIG_DIGITS: usize;

    /// Lossless widening from a wire-format `f32`.
    fn from_f32_exact(v: f32) -> Self;

    /// Narrowing to wire-format `f32` (round-to-nearest for `f64` sources).
    fn to_f32_wire(self) -> f32;
}

impl Scalar for f32 {
    const EXACT_SIG_DIGITS: usize = 9;

    fn from_f32_exact(v: f32) -> Self {
        v
    }

    fn to_f32_wire(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    const EXACT_SIG_DIGITS: usize = 17;

    fn from_f32_exact(v: f32) -> Self {
        f64::from(v)
    }

    fn to_f32_wire(self) -> f32 {
        self as f32
    }
}
