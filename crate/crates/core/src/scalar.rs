//! Scalar abstraction shared by the optics, amplitude and rate formulas.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the physics formulas are written against: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Picoseconds per second, the time-tag resolution.
pub const PS_PER_S: f64 = 1e12;

pub(crate) fn seconds_to_ps(t: f64) -> u64 {
    (t * PS_PER_S).round().max(0.0) as u64
}

pub(crate) fn ps_to_seconds(t: u64) -> f64 {
    t as f64 / PS_PER_S
}
