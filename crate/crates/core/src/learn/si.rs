//! System identification: recursive least squares on the moment operator.
//!
//! Every response row of the operator matrix shares the regressor
//! `svec(Z)`, so a single covariance recursion serves all rows. The
//! identified operator is handed to exact policy iteration for
//! certainty-equivalent controller synthesis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact::{exact_policy_iteration, CostSpec};
use crate::rollout::Sample;
use crate::scalar::Scalar;
use crate::sym::sd;
use crate::system::{is_ms_stabilizing, CpOperator, Policy};

/// Recursive least-squares state for the operator estimate.
#[derive(Debug, Clone)]
pub struct SiState<T: Scalar> {
    /// Row-stacked operator estimate, `sd(n_x) × sd(n_z)`.
    m_hat: DMatrix<T>,
    /// Shared regressor covariance, `sd(n_z) × sd(n_z)`.
    s: DMatrix<T>,
    n_x: usize,
    n_u: usize,
}

/// Near-uninformative default prior variance; identification then needs no
/// initial guess while the recursion stays defined from the first sample.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 1e6;

impl<T: Scalar> SiState<T> {
    pub fn new(n_x: usize, n_u: usize, prior_variance: T) -> Result<Self> {
        if n_x == 0 || n_u == 0 {
            return Err(Error::InvalidConfig("SI needs non-empty dimensions".into()));
        }
        if prior_variance <= T::zero() {
            return Err(Error::InvalidConfig("prior variance must be positive".into()));
        }
        let p = sd(n_x + n_u);
        Ok(Self {
            m_hat: DMatrix::zeros(sd(n_x), p),
            s: DMatrix::identity(p, p) * prior_variance,
            n_x,
            n_u,
        })
    }

    pub fn with_default_prior(n_x: usize, n_u: usize) -> Result<Self> {
        Self::new(n_x, n_u, nalgebra::convert(DEFAULT_PRIOR_VARIANCE))
    }

    /// Current estimate wrapped as a moment operator.
    pub fn operator(&self) -> CpOperator<T> {
        CpOperator::new(self.n_x, self.n_u, self.m_hat.clone()).expect("shape fixed")
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m_hat
    }

    /// One shared-regressor recursion step over all response rows.
    pub fn update(&mut self, sample: &Sample<T>) -> Result<()> {
        if sample.z.dim() != self.n_x + self.n_u || sample.x_plus.dim() != self.n_x {
            return Err(Error::DimensionMismatch {
                context: "SiState::update",
                expected: self.n_x + self.n_u,
                got: sample.z.dim(),
            });
        }
        let phi: DVector<T> = sample.z.svec().into_data();
        let y: DVector<T> = sample.x_plus.svec().into_data();
        let s_phi = &self.s * &phi;
        // S stays positive definite, so the denominator is at least one.
        let denominator = T::one() + phi.dot(&s_phi);
        let gain = s_phi / denominator;
        let residual = y - &self.m_hat * &phi;
        self.m_hat += residual * gain.transpose();
        let phi_s = phi.transpose() * &self.s;
        self.s -= gain * phi_s;
        Ok(())
    }
}

/// Outcome of certainty-equivalent synthesis on the identified operator.
#[derive(Debug, Clone)]
pub struct SiSynthesis<T: Scalar> {
    pub policy: Policy<T>,
    /// True when no stabilizing solution was found and the fallback gain
    /// was returned instead.
    pub fell_back: bool,
}

impl<T: Scalar> SiState<T> {
    /// Runs exact policy iteration on the identified operator, starting
    /// from the fallback gain or, failing that, the zero gain. Returns the
    /// fallback with a flag when the estimate admits no stabilizing
    /// solution.
    pub fn synthesize(&self, cost: &CostSpec<T>, k_fallback: &Policy<T>) -> SiSynthesis<T> {
        let op = self.operator();
        let zero = Policy::zero(self.n_u, self.n_x);
        for candidate in [k_fallback, &zero] {
            if !is_ms_stabilizing(&op, candidate).unwrap_or(false) {
                continue;
            }
            if let Ok(cert) =
                exact_policy_iteration(&op, cost, candidate, 200, nalgebra::convert(1e-12))
            {
                return SiSynthesis {
                    policy: cert.policy,
                    fell_back: false,
                };
            }
        }
        SiSynthesis {
            policy: k_fallback.clone(),
            fell_back: true,
        }
    }
}
