//! Low-level random draws shared by the noise models and the rollout
//! generator. Every function takes an explicit RNG stream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::scalar::SampleScalar;

/// Vector of i.i.d. standard normal entries.
pub fn gaussian_vector<T: SampleScalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(d, |_, _| T::standard_normal(rng))
}

/// Uniform draw from the solid Euclidean ball of radius `r`.
///
/// Gaussian direction, radius rescaled by `U^(1/d)`; the second moment of
/// the result is `r²/(d+2)·I`.
pub fn sample_ball<T: SampleScalar, R: Rng + ?Sized>(d: usize, r: T, rng: &mut R) -> DVector<T> {
    if r == T::zero() {
        return DVector::zeros(d);
    }
    let mut g = gaussian_vector::<T, R>(d, rng);
    let mut norm = g.norm();
    while norm == T::zero() {
        g = gaussian_vector::<T, R>(d, rng);
        norm = g.norm();
    }
    let exponent = T::one() / nalgebra::convert::<f64, T>(d as f64);
    let radius = r * T::unit_uniform(rng).powf(exponent);
    g * (radius / norm)
}

/// Uniform draw from the sphere `{U : ‖U‖_F = r}` of `rows × cols` matrices.
pub fn sample_sphere_matrix<T: SampleScalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    r: T,
    rng: &mut R,
) -> DMatrix<T> {
    if r == T::zero() {
        return DMatrix::zeros(rows, cols);
    }
    let mut g = DMatrix::from_fn(rows, cols, |_, _| T::standard_normal(rng));
    let mut norm = g.norm();
    while norm == T::zero() {
        g = DMatrix::from_fn(rows, cols, |_, _| T::standard_normal(rng));
        norm = g.norm();
    }
    g * (r / norm)
}
