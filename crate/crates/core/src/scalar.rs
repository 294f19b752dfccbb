//! Scalar abstraction the numeric core is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar type for datasets, models and all numeric stages.
///
/// `f32` and `f64` both implement it; the CLI and the on-disk formats use
/// `f64` (see the `*64` aliases at the crate root).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Conversion from a count. Counts in this crate stay far below the
    /// integer range where `f32` loses exactness enough to matter.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    /// Conversion from an `f64` constant or RNG draw.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 representable as scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
