//! Scalar abstraction for good values and Shapley arithmetic.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type used for good values, coalition worths and Shapley
/// values. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used when loading scenario files.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Slack used when two routes to the same worth are compared, scaled by
    /// the magnitude of the values involved.
    fn reassociation_slack(magnitude: Self) -> Self {
        Self::epsilon() * Self::of(64.0) * magnitude.abs().max(Self::one())
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// How per-agent accumulators add up contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    #[default]
    Plain,
    Compensated,
}

impl std::str::FromStr for Summation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "plain" => Ok(Summation::Plain),
            "compensated" => Ok(Summation::Compensated),
            other => Err(crate::error::Error::InvalidParameter(format!(
                "summation must be plain or compensated, not `{other}`"
            ))),
        }
    }
}

/// Accumulator that follows a [`Summation`] policy.
#[derive(Debug, Clone, Copy)]
pub struct Accumulator<T> {
    mode: Summation,
    inner: CompensatedSum<T>,
}

impl<T: Scalar> Accumulator<T> {
    pub fn new(mode: Summation) -> Self {
        Self {
            mode,
            inner: CompensatedSum::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        match self.mode {
            Summation::Plain => self.inner.sum += x,
            Summation::Compensated => self.inner.add(x),
        }
    }

    pub fn value(&self) -> T {
        self.inner.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::<f64>::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }

    #[test]
    fn slack_scales_with_magnitude() {
        assert!(f64::reassociation_slack(1e6) > f64::reassociation_slack(1.0));
        assert!(f32::reassociation_slack(1.0) > f64::reassociation_slack(1.0) as f32);
    }
}
