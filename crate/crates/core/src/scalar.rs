//! Scalar abstraction: every numerical routine is generic over `f32`/`f64`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, NumCast};
use rand::Rng;

/// Real scalar type used throughout the crate.
///
/// `f64` is the intended workhorse (all default tolerances assume it);
/// `f32` satisfies the same bounds for quick, low-precision runs.
pub trait Scalar: RealField + FromPrimitive + NumCast + Copy {}

impl<T> Scalar for T where T: RealField + FromPrimitive + NumCast + Copy {}

/// Scalars that can be drawn from the random sources used by the samplers.
pub trait SampleScalar: Scalar {
    /// One standard-normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl SampleScalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl SampleScalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

/// Lossy conversion to `f64` for diagnostics carried inside errors.
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    NumCast::from(x).unwrap_or(f64::NAN)
}
