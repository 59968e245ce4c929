//! Scalar abstraction shared by the numeric parts of the crate.
//!
//! Reward shaping, the Q-table, the adaptive bound, CoTo and the metric
//! formulas are written once against [`Scalar`] and instantiated for `f32`
//! and `f64`. The simulator itself keeps bytes as `u64` and time as `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the controller and metric code.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    ///
    /// Every finite `f64` is representable (possibly rounded) in both `f32`
    /// and `f64`, so this never fails for the constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant converts to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
