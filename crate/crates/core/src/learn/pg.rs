//! Zeroth-order natural policy gradient.
//!
//! The gradient of the closed-loop cost is estimated from rollouts whose
//! gains are perturbed on a Frobenius sphere: with per-trajectory cost
//! `Ĵ_j = Σ_t tr[Z_t H]` the estimator is
//! `∇Ĵ = Σ_j (n_x n_u)/(M r²) · Ĵ_j U_j`, together with the state moment
//! aggregate `Σ̂ = (1/M) Σ_j Σ_t (Z_t)_xx`. These use additive-noise-free
//! rollouts; exploration comes solely from the gain perturbation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exact::CostSpec;
use crate::rollout::{generate, RolloutConfig, RolloutState, Sample};
use crate::scalar::{to_f64, SampleScalar, Scalar};
use crate::sym::SymMat;
use crate::system::{MsSystem, Policy};

/// States beyond this norm mark a trajectory as diverged; it is excluded
/// from the estimator and counted.
pub const DIVERGENCE_NORM_GUARD: f64 = 1e8;

/// Output of one gradient evaluation.
#[derive(Debug, Clone)]
pub struct PgGradient<T: Scalar> {
    pub grad: DMatrix<T>,
    /// Aggregated closed-loop state moment `Σ̂`.
    pub sigma: SymMat<T>,
    pub used_trajectories: usize,
    pub excluded_trajectories: usize,
}

fn trajectory_is_sane<T: Scalar>(samples: &[Sample<T>]) -> bool {
    let guard: T = nalgebra::convert(DIVERGENCE_NORM_GUARD * DIVERGENCE_NORM_GUARD);
    samples.iter().all(|s| {
        let zt = s.z.trace();
        let xt = s.x_plus.trace();
        zt.is_finite() && xt.is_finite() && zt <= guard && xt <= guard
    })
}

/// Estimates the cost gradient at `k` from one iteration of perturbed
/// rollouts. `cfg.gain_radius` is the exploration radius and must be
/// positive; the additive input noise is forced to zero.
pub fn pg_gradient<T: SampleScalar>(
    sys: &MsSystem<T>,
    cost: &CostSpec<T>,
    k: &Policy<T>,
    cfg: &RolloutConfig<T>,
    state: &mut RolloutState<T>,
) -> Result<PgGradient<T>> {
    if cfg.gain_radius <= T::zero() {
        return Err(Error::InvalidConfig(
            "policy gradient needs a positive gain perturbation radius".into(),
        ));
    }
    let mut rollout_cfg = cfg.clone();
    rollout_cfg.input_noise_radius = T::zero();
    let samples = generate(sys, &rollout_cfg, k, state)?;

    let (n_x, n_u) = (k.state_dim(), k.input_dim());
    let mut grad = DMatrix::zeros(n_u, n_x);
    let mut sigma = DMatrix::zeros(n_x, n_x);
    let mut used = 0;
    let mut excluded = 0;
    for traj_samples in samples.chunks(rollout_cfg.horizon) {
        if !trajectory_is_sane(traj_samples) {
            excluded += 1;
            continue;
        }
        let perturbation = traj_samples[0].applied_gain.gain() - k.gain();
        let mut cost_sum = T::zero();
        for s in traj_samples {
            cost_sum += cost.h().dot(&s.z);
            let (z_xx, _, _) = s.z.blocks(n_x, n_u)?;
            sigma += z_xx.matrix();
        }
        grad += perturbation * cost_sum;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NonFinite {
            context: "policy gradient rollouts (all trajectories diverged)",
        });
    }

    let r = rollout_cfg.gain_radius;
    let count: T = nalgebra::convert(used as f64);
    let dims: T = nalgebra::convert((n_x * n_u) as f64);
    grad *= dims / (count * r * r);
    sigma /= count;
    Ok(PgGradient {
        grad,
        sigma: SymMat::symmetrized(sigma),
        used_trajectories: used,
        excluded_trajectories: excluded,
    })
}

/// How the state-moment aggregate scales the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PgScaling {
    /// `K ← K - η ∇Ĵ Σ̂` (right multiplication by the aggregate).
    #[default]
    CovarianceProduct,
    /// `K ← K - η ∇Ĵ Σ̂⁻¹` (the conventional natural-gradient scaling).
    CovarianceInverse,
}

/// Gradient-descent iterate and step size.
#[derive(Debug, Clone)]
pub struct PgState<T: Scalar> {
    gain: Policy<T>,
    step_size: T,
    scaling: PgScaling,
}

impl<T: Scalar> PgState<T> {
    pub fn new(gain: Policy<T>, step_size: T, scaling: PgScaling) -> Result<Self> {
        if step_size < T::zero() {
            return Err(Error::InvalidConfig("step size must be nonnegative".into()));
        }
        Ok(Self {
            gain,
            step_size,
            scaling,
        })
    }

    pub fn gain(&self) -> &Policy<T> {
        &self.gain
    }

    /// One descent step with the estimated gradient and moment aggregate.
    pub fn step(&mut self, grad: &DMatrix<T>, sigma: &SymMat<T>) -> Result<()> {
        let direction = match self.scaling {
            PgScaling::CovarianceProduct => grad * sigma.matrix(),
            PgScaling::CovarianceInverse => {
                let chol = sigma.matrix().clone().cholesky().ok_or_else(|| {
                    Error::NotPositiveDefinite {
                        context: "pg moment aggregate",
                        min_eigenvalue: to_f64(sigma.min_eigenvalue()),
                    }
                })?;
                chol.solve(&grad.transpose()).transpose()
            }
        };
        self.gain = Policy::new(self.gain.gain() - direction * self.step_size)?;
        Ok(())
    }
}
