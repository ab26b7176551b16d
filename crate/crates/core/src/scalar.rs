// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar abstraction shared by every estimator in the crate.
//!
//! All statistics are written against [`Real`] so the same code runs in
//! `f32` or `f64`. Simulation and the Monte Carlo harness work in `f64`
//! and hand series to the generic estimators.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants are written in `f64` throughout.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    /// Conversion from a count or index.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
