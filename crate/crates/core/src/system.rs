//! Linear systems with state- and input-multiplicative noise, the linear
//! operator propagating second moments one step, and mean-square stability.
//!
//! The state recursion is `x⁺ = (Σ_ℓ A_ℓ w_ℓ) x + (Σ_ℓ B_ℓ w_ℓ) u` with
//! `w` an i.i.d. disturbance. Writing `z = (x, u)` and `Z = E[z zᵀ]`, the
//! state second moment evolves linearly through a completely positive map
//! which this module exposes directly ([`MsSystem::apply`]), as its adjoint,
//! as a per-draw sample ([`MsSystem::sampled`]), and as an explicit matrix
//! in svec coordinates ([`CpOperator`]).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::sample_ball;
use crate::scalar::{to_f64, SampleScalar, Scalar};
use crate::sym::{congruence_matrix, sd, SvecVec, SymMat};

pub mod config;

/// Distribution of the multiplicative disturbance `w`.
#[derive(Debug, Clone)]
pub enum NoiseSpec<T: Scalar> {
    /// `w = (1, v)` with `v` uniform on the solid ellipsoid scaled so that
    /// `E[v vᵀ]` equals the given diagonal exactly.
    ConstantPlusEllipsoid { v_moment_diag: DVector<T> },
    /// `w ~ N(mean, cov)`.
    Gaussian { mean: DVector<T>, cov: SymMat<T> },
    /// Finite support: `w = w_k` with probability `p_k`.
    Table { entries: Vec<(T, DVector<T>)> },
}

impl<T: Scalar> NoiseSpec<T> {
    /// A disturbance that is constantly `1`, i.e. no randomness.
    pub fn deterministic() -> Self {
        NoiseSpec::Table {
            entries: vec![(T::one(), DVector::from_element(1, T::one()))],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::ConstantPlusEllipsoid { v_moment_diag } => 1 + v_moment_diag.len(),
            NoiseSpec::Gaussian { mean, .. } => mean.len(),
            NoiseSpec::Table { entries } => entries.first().map_or(0, |(_, w)| w.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::ConstantPlusEllipsoid { v_moment_diag } => {
                if v_moment_diag.iter().any(|&d| d < T::zero()) {
                    return Err(Error::NotPositiveDefinite {
                        context: "noise ellipsoid moment",
                        min_eigenvalue: to_f64(
                            v_moment_diag.iter().cloned().fold(T::zero(), T::min),
                        ),
                    });
                }
            }
            NoiseSpec::Gaussian { mean, cov } => {
                if cov.dim() != mean.len() {
                    return Err(Error::DimensionMismatch {
                        context: "gaussian noise covariance",
                        expected: mean.len(),
                        got: cov.dim(),
                    });
                }
                let min_eig = cov.min_eigenvalue();
                if min_eig < -nalgebra::convert::<f64, T>(1e-10) {
                    return Err(Error::NotPositiveDefinite {
                        context: "gaussian noise covariance",
                        min_eigenvalue: to_f64(min_eig),
                    });
                }
            }
            NoiseSpec::Table { entries } => {
                if entries.is_empty() {
                    return Err(Error::InvalidConfig("noise table is empty".into()));
                }
                let dim = entries[0].1.len();
                if entries.iter().any(|(_, w)| w.len() != dim) || dim == 0 {
                    return Err(Error::InvalidConfig(
                        "noise table entries have inconsistent dimensions".into(),
                    ));
                }
                let total: T = entries.iter().map(|(p, _)| *p).fold(T::zero(), |a, p| a + p);
                if entries.iter().any(|(p, _)| *p < T::zero())
                    || (total - T::one()).abs() > nalgebra::convert(1e-9)
                {
                    return Err(Error::InvalidConfig(
                        "noise table probabilities must be nonnegative and sum to 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Exact second moment `E[w wᵀ]` induced by this distribution.
    pub fn second_moment(&self) -> SymMat<T> {
        match self {
            NoiseSpec::ConstantPlusEllipsoid { v_moment_diag } => {
                let d = 1 + v_moment_diag.len();
                let mut mat = DMatrix::zeros(d, d);
                mat[(0, 0)] = T::one();
                for (i, &m) in v_moment_diag.iter().enumerate() {
                    mat[(i + 1, i + 1)] = m;
                }
                SymMat::symmetrized(mat)
            }
            NoiseSpec::Gaussian { mean, cov } => {
                SymMat::symmetrized(cov.matrix() + mean * mean.transpose())
            }
            NoiseSpec::Table { entries } => {
                let d = self.dim();
                let mut acc = DMatrix::zeros(d, d);
                for (p, w) in entries {
                    acc += (w * w.transpose()) * *p;
                }
                SymMat::symmetrized(acc)
            }
        }
    }
}

impl<T: SampleScalar> NoiseSpec<T> {
    /// One i.i.d. draw of `w`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        match self {
            NoiseSpec::ConstantPlusEllipsoid { v_moment_diag } => {
                let d_v = v_moment_diag.len();
                // v = L·u with u uniform in the unit ball and
                // L = sqrt((d_v + 2)·E[vvᵀ]) makes the second moment exact.
                let u = sample_ball(d_v, T::one(), rng);
                let scale = nalgebra::convert::<f64, T>(d_v as f64 + 2.0);
                let mut w = DVector::zeros(1 + d_v);
                w[0] = T::one();
                for i in 0..d_v {
                    w[i + 1] = (scale * v_moment_diag[i]).sqrt() * u[i];
                }
                w
            }
            NoiseSpec::Gaussian { mean, cov } => {
                let factor = psd_factor(cov);
                let g = crate::sampling::gaussian_vector(mean.len(), rng);
                mean + factor * g
            }
            NoiseSpec::Table { entries } => {
                let mut u = T::unit_uniform(rng);
                for (p, w) in entries {
                    if u < *p {
                        return w.clone();
                    }
                    u -= *p;
                }
                entries.last().expect("validated non-empty").1.clone()
            }
        }
    }
}

/// Symmetric factor `L` with `L Lᵀ = X`, valid for semidefinite `X`.
fn psd_factor<T: Scalar>(x: &SymMat<T>) -> DMatrix<T> {
    let eig = x.matrix().clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(T::zero()).sqrt();
        scaled.column_mut(k).scale_mut(s);
    }
    scaled
}

/// Linear state feedback `u = K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T: Scalar> {
    gain: DMatrix<T>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(gain: DMatrix<T>) -> Result<Self> {
        if gain.is_empty() {
            return Err(Error::InvalidConfig("empty policy gain".into()));
        }
        if gain.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy gain",
            });
        }
        Ok(Self { gain })
    }

    /// Single-input gain from a row of coefficients.
    pub fn from_row(row: &[T]) -> Self {
        Self::new(DMatrix::from_row_slice(1, row.len(), row)).expect("finite gain row")
    }

    pub fn zero(n_u: usize, n_x: usize) -> Self {
        Self {
            gain: DMatrix::zeros(n_u, n_x),
        }
    }

    pub fn gain(&self) -> &DMatrix<T> {
        &self.gain
    }

    pub fn state_dim(&self) -> usize {
        self.gain.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.gain.nrows()
    }

    /// The stacked matrix `[I; K]` mapping a state to the augmented state.
    pub fn lift_matrix(&self) -> DMatrix<T> {
        let (n_u, n_x) = self.gain.shape();
        let mut l = DMatrix::zeros(n_x + n_u, n_x);
        l.view_mut((0, 0), (n_x, n_x))
            .copy_from(&DMatrix::identity(n_x, n_x));
        l.view_mut((n_x, 0), (n_u, n_x)).copy_from(&self.gain);
        l
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        &self.gain * x
    }
}

/// Linear map `sym(n_z) → sym(n_x)` propagating augmented second moments.
///
/// Implemented both by the exact system model ([`MsSystem`]) and by its
/// data-driven estimate ([`CpOperator`]); the model-based control routines
/// are generic over this trait.
pub trait MomentMap<T: Scalar> {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    fn aug_dim(&self) -> usize {
        self.state_dim() + self.input_dim()
    }

    /// Forward map on augmented second moments.
    fn apply(&self, z: &SymMat<T>) -> Result<SymMat<T>>;

    /// Adjoint map on value Hessians, `tr[P·apply(Z)] = tr[apply_adjoint(P)·Z]`.
    fn apply_adjoint(&self, p: &SymMat<T>) -> Result<SymMat<T>>;

    /// Matrix of the map in svec coordinates, built column by column from
    /// the coordinate basis.
    fn operator_matrix(&self) -> CpOperator<T> {
        let (n_x, n_z) = (self.state_dim(), self.aug_dim());
        let mut mat = DMatrix::zeros(sd(n_x), sd(n_z));
        for k in 0..sd(n_z) {
            let mut unit = DVector::zeros(sd(n_z));
            unit[k] = T::one();
            let basis = SvecVec::new(unit).expect("triangular by construction").unsvec();
            let image = self.apply(&basis).expect("dimensions fixed by trait");
            mat.set_column(k, image.svec().data());
        }
        CpOperator::new(n_x, self.input_dim(), mat).expect("shape correct by construction")
    }
}

/// Explicit svec-coordinate matrix of a moment map; also the carrier for
/// least-squares estimates of it.
#[derive(Debug, Clone, PartialEq)]
pub struct CpOperator<T: Scalar> {
    n_x: usize,
    n_u: usize,
    mat: DMatrix<T>,
}

impl<T: Scalar> CpOperator<T> {
    pub fn new(n_x: usize, n_u: usize, mat: DMatrix<T>) -> Result<Self> {
        let n_z = n_x + n_u;
        if mat.nrows() != sd(n_x) || mat.ncols() != sd(n_z) {
            return Err(Error::DimensionMismatch {
                context: "CpOperator::new",
                expected: sd(n_x) * sd(n_z),
                got: mat.nrows() * mat.ncols(),
            });
        }
        Ok(Self { n_x, n_u, mat })
    }

    pub fn zeros(n_x: usize, n_u: usize) -> Self {
        Self {
            n_x,
            n_u,
            mat: DMatrix::zeros(sd(n_x), sd(n_x + n_u)),
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }
}

impl<T: Scalar> MomentMap<T> for CpOperator<T> {
    fn state_dim(&self) -> usize {
        self.n_x
    }

    fn input_dim(&self) -> usize {
        self.n_u
    }

    fn apply(&self, z: &SymMat<T>) -> Result<SymMat<T>> {
        if z.dim() != self.aug_dim() {
            return Err(Error::DimensionMismatch {
                context: "CpOperator::apply",
                expected: self.aug_dim(),
                got: z.dim(),
            });
        }
        Ok(SvecVec::new(&self.mat * z.svec().data())
            .expect("row count is triangular")
            .unsvec())
    }

    fn apply_adjoint(&self, p: &SymMat<T>) -> Result<SymMat<T>> {
        if p.dim() != self.n_x {
            return Err(Error::DimensionMismatch {
                context: "CpOperator::apply_adjoint",
                expected: self.n_x,
                got: p.dim(),
            });
        }
        // svec is orthonormal, so the adjoint matrix is the transpose.
        Ok(SvecVec::new(self.mat.transpose() * p.svec().data())
            .expect("column count is triangular")
            .unsvec())
    }

    fn operator_matrix(&self) -> CpOperator<T> {
        self.clone()
    }
}

/// A linear system with multiplicative noise: mode matrices, the noise
/// distribution, and its exact second moment.
#[derive(Debug, Clone)]
pub struct MsSystem<T: Scalar> {
    n_x: usize,
    n_u: usize,
    modes: Vec<(DMatrix<T>, DMatrix<T>)>,
    /// Stacked mode matrices `[A_ℓ, B_ℓ]`, cached for the moment maps.
    stacked: Vec<DMatrix<T>>,
    noise: NoiseSpec<T>,
    w_moment: SymMat<T>,
}

impl<T: Scalar> MsSystem<T> {
    /// Builds a system from mode pairs `(A_ℓ, B_ℓ)` and a noise model whose
    /// dimension must equal the number of modes. The stored noise second
    /// moment is derived exactly from the distribution.
    pub fn new(modes: Vec<(DMatrix<T>, DMatrix<T>)>, noise: NoiseSpec<T>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidConfig("system needs at least one mode".into()));
        }
        let (n_x, n_u) = (modes[0].0.nrows(), modes[0].1.ncols());
        if n_x == 0 || n_u == 0 {
            return Err(Error::InvalidConfig("state and input must be non-empty".into()));
        }
        for (a, b) in &modes {
            if a.nrows() != n_x || a.ncols() != n_x || b.nrows() != n_x || b.ncols() != n_u {
                return Err(Error::DimensionMismatch {
                    context: "MsSystem mode matrices",
                    expected: n_x,
                    got: a.nrows(),
                });
            }
        }
        noise.validate()?;
        if noise.dim() != modes.len() {
            return Err(Error::DimensionMismatch {
                context: "MsSystem noise dimension",
                expected: modes.len(),
                got: noise.dim(),
            });
        }
        let stacked = modes
            .iter()
            .map(|(a, b)| {
                let mut f = DMatrix::zeros(n_x, n_x + n_u);
                f.view_mut((0, 0), (n_x, n_x)).copy_from(a);
                f.view_mut((0, n_x), (n_x, n_u)).copy_from(b);
                f
            })
            .collect();
        let w_moment = noise.second_moment();
        Ok(Self {
            n_x,
            n_u,
            modes,
            stacked,
            noise,
            w_moment,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[(DMatrix<T>, DMatrix<T>)] {
        &self.modes
    }

    pub fn noise(&self) -> &NoiseSpec<T> {
        &self.noise
    }

    /// Noise second moment `E[w wᵀ]`.
    pub fn noise_moment(&self) -> &SymMat<T> {
        &self.w_moment
    }

    /// One step of the stochastic dynamics for a realized disturbance.
    pub fn step(&self, x: &DVector<T>, u: &DVector<T>, w: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.n_x {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::step state",
                expected: self.n_x,
                got: x.len(),
            });
        }
        if u.len() != self.n_u {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::step input",
                expected: self.n_u,
                got: u.len(),
            });
        }
        if w.len() != self.noise_dim() {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::step noise",
                expected: self.noise_dim(),
                got: w.len(),
            });
        }
        let mut next = DVector::zeros(self.n_x);
        for (ell, (a, b)) in self.modes.iter().enumerate() {
            next += (a * x + b * u) * w[ell];
        }
        Ok(next)
    }

    /// Per-draw moment map: the forward map with `W` replaced by `w wᵀ`.
    /// On rank-one `Z = z zᵀ` this equals `outer(step(x, u, w))`.
    pub fn sampled(&self, z: &SymMat<T>, w: &DVector<T>) -> Result<SymMat<T>> {
        if z.dim() != self.aug_dim() {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::sampled",
                expected: self.aug_dim(),
                got: z.dim(),
            });
        }
        if w.len() != self.noise_dim() {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::sampled noise",
                expected: self.noise_dim(),
                got: w.len(),
            });
        }
        let mut f_w = DMatrix::zeros(self.n_x, self.aug_dim());
        for (ell, f) in self.stacked.iter().enumerate() {
            f_w += f * w[ell];
        }
        Ok(SymMat::symmetrized(&f_w * z.matrix() * f_w.transpose()))
    }
}

impl<T: SampleScalar> MsSystem<T> {
    /// One i.i.d. disturbance draw.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        self.noise.sample(rng)
    }
}

impl<T: Scalar> MomentMap<T> for MsSystem<T> {
    fn state_dim(&self) -> usize {
        self.n_x
    }

    fn input_dim(&self) -> usize {
        self.n_u
    }

    fn apply(&self, z: &SymMat<T>) -> Result<SymMat<T>> {
        if z.dim() != self.aug_dim() {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::apply",
                expected: self.aug_dim(),
                got: z.dim(),
            });
        }
        let w = self.w_moment.matrix();
        let products: Vec<DMatrix<T>> = self
            .stacked
            .iter()
            .map(|f| f * z.matrix())
            .collect();
        let mut acc = DMatrix::zeros(self.n_x, self.n_x);
        for (i, fz) in products.iter().enumerate() {
            for (j, f) in self.stacked.iter().enumerate() {
                if w[(i, j)] != T::zero() {
                    acc += fz * f.transpose() * w[(i, j)];
                }
            }
        }
        Ok(SymMat::symmetrized(acc))
    }

    fn apply_adjoint(&self, p: &SymMat<T>) -> Result<SymMat<T>> {
        if p.dim() != self.n_x {
            return Err(Error::DimensionMismatch {
                context: "MsSystem::apply_adjoint",
                expected: self.n_x,
                got: p.dim(),
            });
        }
        let w = self.w_moment.matrix();
        let products: Vec<DMatrix<T>> = self
            .stacked
            .iter()
            .map(|f| f.transpose() * p.matrix())
            .collect();
        let n_z = self.aug_dim();
        let mut acc = DMatrix::zeros(n_z, n_z);
        for (i, fp) in products.iter().enumerate() {
            for (j, f) in self.stacked.iter().enumerate() {
                if w[(i, j)] != T::zero() {
                    acc += fp * f * w[(i, j)];
                }
            }
        }
        Ok(SymMat::symmetrized(acc))
    }
}

/// Spectral radius of a (generally non-symmetric) real matrix.
pub fn spectral_radius<T: Scalar>(mat: &DMatrix<T>) -> T {
    mat.complex_eigenvalues()
        .iter()
        .fold(T::zero(), |acc, e| acc.max((e.re * e.re + e.im * e.im).sqrt()))
}

/// Stability margin on the closed-loop spectral radius, scaled so that it
/// stays meaningful in reduced precision.
fn stability_margin<T: Scalar>() -> T {
    let spec: T = nalgebra::convert(1e-9);
    spec.max(T::default_epsilon() * nalgebra::convert(1e3))
}

/// Matrix of the closed-loop moment recursion `X ↦ apply(lift_K(X))` in
/// svec coordinates.
pub fn closed_loop_matrix<T: Scalar, O: MomentMap<T>>(
    op: &O,
    pol: &Policy<T>,
) -> Result<DMatrix<T>> {
    if pol.state_dim() != op.state_dim() || pol.input_dim() != op.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "closed_loop_matrix policy",
            expected: op.state_dim(),
            got: pol.state_dim(),
        });
    }
    let lift = congruence_matrix(&pol.lift_matrix());
    Ok(op.operator_matrix().matrix() * lift)
}

/// Whether the closed loop is mean-square stable, i.e. the spectral radius
/// of the closed-loop moment recursion is below one with margin.
pub fn is_ms_stabilizing<T: Scalar, O: MomentMap<T>>(op: &O, pol: &Policy<T>) -> Result<bool> {
    let t = closed_loop_matrix(op, pol)?;
    Ok(spectral_radius(&t) < T::one() - stability_margin::<T>())
}
