//! Scalar abstraction shared by the availability and latency engines.
//!
//! Evidence documents are always read as `f64`; engines lift values into any
//! [`Scalar`] at plan-construction time so the same evaluation code runs in
//! `f32` (quick what-if sweeps) or `f64` (everything the compiler emits).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the probability and latency arithmetic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lifts an evidence value into the scalar type.
    fn lift(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to every scalar")
    }

    /// Lifts an integer count.
    fn count(value: u64) -> Self {
        Self::from_u64(value).expect("u64 converts to every scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
