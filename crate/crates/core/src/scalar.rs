use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};

/// Numeric type the counting kernels (metrics, threshold calibration) run over.
///
/// Implemented for every `Copy` type with ring arithmetic, ordering and
/// integer conversion, which covers `f32`, `f64` and `Ratio<i64>`.
pub trait Scalar: Num + FromPrimitive + PartialOrd + Copy + Debug {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// `i / 100`, the calibration grid point with index `i`.
    fn hundredths(i: u32) -> Self {
        Self::from_count(u64::from(i)) / Self::from_count(100)
    }
}

impl<T> Scalar for T where T: Num + FromPrimitive + PartialOrd + Copy + Debug {}
