//! Scalar abstraction shared by every numerical module.
//!
//! All algorithms are written once against [`Real`]; `f64` is the working
//! precision used by the experiments and the CLI, `f32` is supported for the
//! linear-algebra paths where reduced precision is acceptable.

use nalgebra::RealField;
use num_traits::ToPrimitive;
use std::fmt::LowerExp;

/// Real floating-point scalar usable by the numerical core.
pub trait Real: RealField + Copy + ToPrimitive + LowerExp + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    /// Lossy conversion used for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}
