//! Floating-point scalar used for root-bearing quantities.
//!
//! Everything that can be decided exactly (membership, thresholds, sums of
//! lattice measures) is computed on integers and rationals. Only values that
//! need a square root (sparsity values, averaged distances, chain lengths)
//! are reported through a [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// f32 or f64.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an exact integer.
    fn of_int(v: i128) -> Self {
        <Self as FromPrimitive>::from_i128(v).unwrap_or_else(Self::infinity)
    }

    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T: Real> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> Extend<T> for CompensatedSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// `sqrt(num / den)` evaluated in `T`.
pub(crate) fn sqrt_ratio<T: Real>(num: i128, den: i128) -> T {
    (T::of_int(num) / T::of_int(den)).sqrt()
}
