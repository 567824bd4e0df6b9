//! Scalar abstractions shared by the reward, advantage and objective code.
//!
//! Rewards and stratified advantages only need field arithmetic and an
//! ordering, so they are generic over [`Scalar`] and can run on exact
//! rationals. Standardization and the clipped objective need `sqrt`/`exp`
//! and are generic over [`Real`] (`f32`/`f64`).

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Ordered field element usable for reward and advantage arithmetic.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an element count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Converts an `f64` constant (weights, tolerances) into the scalar type.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant representable in scalar type")
    }

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn clamp_unit(self) -> Self {
        self.max_of(Self::zero()).min_of(Self::one())
    }

    fn in_unit_interval(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// Floating-point scalar.
pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + v);
    Some(sum / T::from_count(values.len()))
}
