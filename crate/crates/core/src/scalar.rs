//! Scalar abstraction shared by the numeric models.
//!
//! Everything under [`crate::ml`] and the metric code in [`crate::eval`] is
//! written against [`Float`], so the same solver code runs in `f32` or `f64`.
//! The pipeline layer (feature matrices, reports, CLI) fixes `F = f64`.

use std::fmt;
use std::iter::Sum;

use num_traits::{FromPrimitive, NumAssignOps, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used by the classifiers and solvers.
pub trait Float:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }
}

impl Float for f32 {}
impl Float for f64 {}
