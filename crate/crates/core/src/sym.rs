//! Dense symmetric matrices and their orthonormal vector coordinates.
//!
//! The coordinate map [`SymMat::svec`] stacks the upper triangle row by row
//! and scales off-diagonal entries by `sqrt(2)`, so that
//! `⟨svec(X), svec(Y)⟩ = tr[X Y]` and `‖svec(X)‖₂ = ‖X‖_F`. Everything
//! downstream (moment operators, Lyapunov solves, least-squares learners)
//! works in these coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};

/// Number of free entries of a symmetric `n`-by-`n` matrix: `n(n+1)/2`.
pub fn sd(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Side length of the symmetric matrix whose coordinate vector has length
/// `len`, when `len` is a triangular number.
pub fn sd_inverse(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    // Integer sqrt truncation can land one short.
    [n, n + 1].into_iter().find(|&m| sd(m) == len)
}

/// Upper-triangle index pairs `(i, j)`, `i ≤ j`, in svec order.
pub(crate) fn svec_index_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// Relative symmetry tolerance used by [`SymMat::new`]. Scales with the
/// working precision so `f32` inputs are not rejected outright.
fn symmetry_tolerance<T: Scalar>() -> T {
    let spec: T = nalgebra::convert(1e-12);
    spec.max(T::default_epsilon() * nalgebra::convert(32.0))
}

/// Dense real symmetric matrix.
///
/// Construction either verifies symmetry up to a relative tolerance and then
/// symmetrizes exactly ([`SymMat::new`]), or symmetrizes unconditionally
/// ([`SymMat::symmetrized`], for products that are symmetric in exact
/// arithmetic but carry floating-point asymmetry).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<T: Scalar> {
    mat: DMatrix<T>,
}

impl<T: Scalar> SymMat<T> {
    /// Wraps a square matrix, verifying symmetry to a relative tolerance.
    pub fn new(mat: DMatrix<T>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "SymMat::new",
                expected: mat.nrows().max(1),
                got: mat.ncols(),
            });
        }
        let mut max_abs = T::zero();
        let mut max_asym = T::zero();
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                max_abs = max_abs.max(mat[(i, j)].abs()).max(mat[(j, i)].abs());
                max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if max_asym > symmetry_tolerance::<T>() * max_abs {
            return Err(Error::NotSymmetric {
                max_asymmetry: to_f64(max_asym),
            });
        }
        Ok(Self::symmetrized(mat))
    }

    /// Wraps `(M + Mᵀ)/2` without a symmetry check.
    ///
    /// # Panics
    /// Panics if the matrix is not square or is empty.
    pub fn symmetrized(mat: DMatrix<T>) -> Self {
        assert!(
            mat.nrows() == mat.ncols() && mat.nrows() > 0,
            "SymMat requires a non-empty square matrix"
        );
        let half: T = nalgebra::convert(0.5);
        let sym = (&mat + mat.transpose()) * half;
        Self { mat: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        assert!(!diag.is_empty());
        Self {
            mat: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Rank-one matrix `z zᵀ`.
    pub fn outer(z: &DVector<T>) -> Self {
        assert!(!z.is_empty());
        Self { mat: z * z.transpose() }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.mat
    }

    pub fn trace(&self) -> T {
        self.mat.trace()
    }

    pub fn norm(&self) -> T {
        self.mat.norm()
    }

    /// Trace inner product `tr[X Y]`.
    pub fn dot(&self, other: &Self) -> T {
        self.mat.dot(&other.mat)
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            mat: &self.mat * factor,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> DVector<T> {
        let mut eigs = self.mat.clone().symmetric_eigenvalues();
        eigs.as_mut_slice()
            .sort_by(|a, b| a.partial_cmp(b).expect("non-comparable eigenvalue"));
        eigs
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    /// Positive semidefiniteness up to `λ_min ≥ -tol·max(1, ‖X‖₂)`.
    pub fn is_psd(&self, tol: T) -> bool {
        let eigs = self.eigenvalues();
        let spectral_norm = eigs
            .iter()
            .fold(T::zero(), |acc, &e| acc.max(e.abs()));
        eigs[0] >= -tol * T::one().max(spectral_norm)
    }

    /// Symmetrized vectorization, row-major over the upper triangle with
    /// `sqrt(2)` scaling off the diagonal.
    pub fn svec(&self) -> SvecVec<T> {
        let n = self.dim();
        let sqrt2 = T::sqrt(nalgebra::convert(2.0));
        let mut data = DVector::zeros(sd(n));
        for (k, (i, j)) in svec_index_pairs(n).enumerate() {
            data[k] = if i == j {
                self.mat[(i, j)]
            } else {
                sqrt2 * self.mat[(i, j)]
            };
        }
        SvecVec { dim: n, data }
    }

    /// Splits a `(n_x + n_u)`-dimensional matrix into its state block, the
    /// input-state cross block, and the input block.
    pub fn blocks(&self, n_x: usize, n_u: usize) -> Result<(SymMat<T>, DMatrix<T>, SymMat<T>)> {
        if self.dim() != n_x + n_u || n_x == 0 || n_u == 0 {
            return Err(Error::DimensionMismatch {
                context: "SymMat::blocks",
                expected: n_x + n_u,
                got: self.dim(),
            });
        }
        let xx = Self {
            mat: self.mat.view((0, 0), (n_x, n_x)).into_owned(),
        };
        let ux = self.mat.view((n_x, 0), (n_u, n_x)).into_owned();
        let uu = Self {
            mat: self.mat.view((n_x, n_x), (n_u, n_u)).into_owned(),
        };
        Ok((xx, ux, uu))
    }
}

impl<T: Scalar> std::ops::Add for &SymMat<T> {
    type Output = SymMat<T>;

    fn add(self, rhs: Self) -> SymMat<T> {
        assert_eq!(self.dim(), rhs.dim());
        SymMat {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<T: Scalar> std::ops::Sub for &SymMat<T> {
    type Output = SymMat<T>;

    fn sub(self, rhs: Self) -> SymMat<T> {
        assert_eq!(self.dim(), rhs.dim());
        SymMat {
            mat: &self.mat - &rhs.mat,
        }
    }
}

/// Coordinate vector of a symmetric matrix under [`SymMat::svec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvecVec<T: Scalar> {
    dim: usize,
    data: DVector<T>,
}

impl<T: Scalar> SvecVec<T> {
    /// Wraps a raw coordinate vector; the length must be a triangular number.
    pub fn new(data: DVector<T>) -> Result<Self> {
        let dim = sd_inverse(data.len()).ok_or(Error::NotTriangular { len: data.len() })?;
        Ok(Self { dim, data })
    }

    pub fn from_slice(data: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(data))
    }

    /// Side length of the matrix this vector encodes.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &DVector<T> {
        &self.data
    }

    pub fn into_data(self) -> DVector<T> {
        self.data
    }

    /// Inverse of [`SymMat::svec`].
    pub fn unsvec(&self) -> SymMat<T> {
        let n = self.dim;
        let inv_sqrt2 = T::one() / T::sqrt(nalgebra::convert(2.0));
        let mut mat = DMatrix::zeros(n, n);
        for (k, (i, j)) in svec_index_pairs(n).enumerate() {
            if i == j {
                mat[(i, j)] = self.data[k];
            } else {
                let v = inv_sqrt2 * self.data[k];
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        SymMat { mat }
    }
}

/// Matrix of the congruence map `X ↦ C X Cᵀ` between svec coordinate spaces,
/// with shape `sd(C.nrows()) × sd(C.ncols())`.
pub fn congruence_matrix<T: Scalar>(c: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = (c.nrows(), c.ncols());
    let mut out = DMatrix::zeros(sd(m), sd(n));
    for (k, (i, j)) in svec_index_pairs(n).enumerate() {
        let ci = c.column(i);
        let cj = c.column(j);
        let image = if i == j {
            ci * ci.transpose()
        } else {
            let inv_sqrt2 = T::one() / T::sqrt(nalgebra::convert(2.0));
            (ci * cj.transpose() + cj * ci.transpose()) * inv_sqrt2
        };
        out.set_column(k, SymMat::symmetrized(image).svec().data());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_sym(n: usize, rng: &mut StdRng) -> SymMat<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMat::symmetrized(m)
    }

    #[test]
    fn sd_small_values() {
        assert_eq!(sd(1), 1);
        assert_eq!(sd(2), 3);
        assert_eq!(sd(3), 6);
    }

    #[test]
    fn sd_inverse_round_trip() {
        for n in 1..=20 {
            assert_eq!(sd_inverse(sd(n)), Some(n));
        }
        assert_eq!(sd_inverse(2), None);
        assert_eq!(sd_inverse(5), None);
    }

    #[test]
    fn svec_identity() {
        let v = SymMat::<f64>::identity(2).svec();
        assert_eq!(v.data().as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn svec_preserves_frobenius_norm() {
        let x = SymMat::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0])).unwrap();
        let v = x.svec();
        assert_relative_eq!(v.data()[0], 1.0);
        assert_relative_eq!(v.data()[1], 2.0 * 2.0_f64.sqrt());
        assert_relative_eq!(v.data()[2], 3.0);
        assert_relative_eq!(v.data().norm_squared(), 18.0, epsilon = 1e-12);
        assert_relative_eq!(v.data().norm_squared(), x.norm() * x.norm(), epsilon = 1e-12);
    }

    // The printed initial guess pins the coordinate ordering: its gain
    // extraction must reproduce [0.5, -0.75].
    #[test]
    fn svec_ordering_matches_reference_gain() {
        let theta = SvecVec::from_slice(&[10.0, 0.0, -2.8284, 4.0, 4.2426, 4.0])
            .unwrap()
            .unsvec();
        let (_, ux, uu) = theta.blocks(2, 1).unwrap();
        assert_relative_eq!(ux[(0, 0)], -2.0, epsilon = 1e-4);
        assert_relative_eq!(ux[(0, 1)], 3.0, epsilon = 1e-4);
        assert_relative_eq!(uu.matrix()[(0, 0)], 4.0);
        let k = -ux / uu.matrix()[(0, 0)];
        assert_relative_eq!(k[(0, 0)], 0.5, epsilon = 1e-4);
        assert_relative_eq!(k[(0, 1)], -0.75, epsilon = 1e-4);
    }

    #[test]
    fn unsvec_examples() {
        let eye = SvecVec::from_slice(&[1.0, 0.0, 1.0]).unwrap().unsvec();
        assert_eq!(eye.matrix(), &DMatrix::identity(2, 2));

        let x = SvecVec::from_slice(&[1.0, 2.0 * 2.0_f64.sqrt(), 3.0])
            .unwrap()
            .unsvec();
        assert_relative_eq!(
            x.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn unsvec_rejects_non_triangular_length() {
        assert!(matches!(
            SvecVec::from_slice(&[1.0, 2.0]),
            Err(Error::NotTriangular { len: 2 })
        ));
    }

    #[test]
    fn new_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 3.0]);
        assert!(matches!(SymMat::new(m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn new_symmetrizes_tiny_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0 + 1e-14, 2.0, 3.0]);
        let x = SymMat::new(m).unwrap();
        assert_eq!(x.matrix()[(0, 1)], x.matrix()[(1, 0)]);
    }

    #[test]
    fn blocks_examples() {
        let (xx, ux, uu) = SymMat::<f64>::identity(3).blocks(2, 1).unwrap();
        assert_eq!(xx.matrix(), &DMatrix::identity(2, 2));
        assert_eq!(ux, DMatrix::zeros(1, 2));
        assert_eq!(uu.matrix()[(0, 0)], 1.0);

        let z = SymMat::outer(&DVector::from_column_slice(&[1.0, 2.0, 3.0]));
        let (xx, ux, uu) = z.blocks(2, 1).unwrap();
        assert_eq!(xx.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert_eq!(ux, DMatrix::from_row_slice(1, 2, &[3.0, 6.0]));
        assert_eq!(uu.matrix()[(0, 0)], 9.0);

        assert!(z.blocks(3, 1).is_err());
    }

    #[test]
    fn outer_examples() {
        let d = SymMat::outer(&DVector::from_column_slice(&[1.0, 0.0]));
        assert_eq!(d.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let ones = SymMat::outer(&DVector::from_column_slice(&[1.0, 1.0]));
        assert!(ones.matrix().iter().all(|&v| v == 1.0));

        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let z = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let x = SymMat::outer(&z);
            assert_relative_eq!(x.norm(), z.norm_squared(), epsilon = 1e-12);
            assert!(x.is_psd(1e-12));
        }
    }

    #[test]
    fn is_psd_examples() {
        assert!(SymMat::<f64>::identity(2).is_psd(1e-12));
        assert!(!SymMat::from_diagonal(&[1.0, -1.0]).is_psd(1e-12));
    }

    #[test]
    fn inner_product_matches_trace() {
        let mut rng = StdRng::seed_from_u64(42);
        for n in 1..=6 {
            for _ in 0..20 {
                let x = random_sym(n, &mut rng);
                let y = random_sym(n, &mut rng);
                let lhs = x.svec().data().dot(y.svec().data());
                let rhs = x.dot(&y);
                assert!((lhs - rhs).abs() <= 1e-10 * x.norm() * y.norm() + 1e-15);
            }
        }
    }

    #[test]
    fn blocks_of_outer_factor() {
        let mut rng = StdRng::seed_from_u64(3);
        let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let u = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let mut z = DVector::zeros(5);
        z.rows_mut(0, 3).copy_from(&x);
        z.rows_mut(3, 2).copy_from(&u);
        let (xx, ux, uu) = SymMat::outer(&z).blocks(3, 2).unwrap();
        assert_relative_eq!(xx.matrix(), &(&x * x.transpose()), epsilon = 1e-14);
        assert_relative_eq!(ux, &u * x.transpose(), epsilon = 1e-14);
        assert_relative_eq!(uu.matrix(), &(&u * u.transpose()), epsilon = 1e-14);
    }

    #[test]
    fn congruence_matrix_matches_direct_product() {
        let mut rng = StdRng::seed_from_u64(11);
        let c = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = congruence_matrix(&c);
        assert_eq!(m.shape(), (3, 6));
        for _ in 0..20 {
            let x = random_sym(3, &mut rng);
            let direct = SymMat::symmetrized(&c * x.matrix() * c.transpose());
            let via = m.clone() * x.svec().data();
            assert_relative_eq!(via, direct.svec().into_data(), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn svec_round_trip(entries in proptest::collection::vec(-100.0_f64..100.0, 1..=21)) {
            // Use the largest triangular prefix as svec data.
            let n = sd_inverse(entries.len())
                .unwrap_or_else(|| (1..).take_while(|&m| sd(m) <= entries.len()).last().unwrap());
            let v = SvecVec::from_slice(&entries[..sd(n)]).unwrap();
            let back = v.unsvec().svec();
            for k in 0..v.len() {
                prop_assert!((v.data()[k] - back.data()[k]).abs() <= 1e-12 * (1.0 + v.data()[k].abs()));
            }
        }

        #[test]
        fn svec_is_linear(
            a in -10.0_f64..10.0,
            b in -10.0_f64..10.0,
            seed in 0_u64..1000,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let x = random_sym(4, &mut rng);
            let y = random_sym(4, &mut rng);
            let combo = &x.scale(a) + &y.scale(b);
            let lhs = combo.svec();
            let rhs = x.svec().data() * a + y.svec().data() * b;
            for k in 0..lhs.len() {
                prop_assert!((lhs.data()[k] - rhs[k]).abs() <= 1e-10 * (1.0 + rhs[k].abs()));
            }
        }
    }
}
