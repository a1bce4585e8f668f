//! Scalar abstraction: all core math is generic over `f32`/`f64`.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
///
/// Combines `nalgebra`'s real-field operations (sqrt, atan2, pi, ...) with
/// `num-traits` conversions so configuration constants and serialized values
/// can move between `f64` and the working precision.
pub trait Real: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {
    /// Convert an `f64` configuration constant into the working scalar.
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("finite configuration value")
    }

    /// Convert a count into the working scalar.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    /// Lossy view of the scalar as `f64` (exact for `f32`/`f64`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where T: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {}
