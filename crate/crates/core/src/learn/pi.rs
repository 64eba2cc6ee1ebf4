//! Approximate policy iteration.
//!
//! Each iteration extracts the greedy gain from the current Q-parameter
//! estimate, gathers a batch of rollout samples under the behavior policy
//! (a fixed gain off-policy, or the fresh iterate on-policy), and feeds
//! every sample through the IV recursion. The confidence matrix persists
//! across iterations, acting as a running summary of all past data.

use crate::error::{Error, Result};
use crate::exact::{improve, CostSpec};
use crate::learn::iv::{iv_regressors, IvState};
use crate::rollout::{generate, RolloutConfig, RolloutState, Sample};
use crate::scalar::{SampleScalar, Scalar};
use crate::sym::sd;
use crate::system::{MsSystem, Policy};

/// What to do when the extracted Q-matrix has no positive definite input
/// block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImproveFailurePolicy {
    /// Keep the previous gain, flag the iteration, keep learning.
    #[default]
    KeepPrevious,
    /// Abort the iteration with an error.
    Abort,
}

/// Per-iteration outcome.
#[derive(Debug, Clone)]
pub struct PiStepInfo<T: Scalar> {
    /// The gain used this iteration (freshly improved unless flagged).
    pub gain: Policy<T>,
    pub improvement_failed: bool,
    /// Samples dropped because the IV denominator was singular.
    pub skipped_samples: usize,
    pub samples_used: usize,
    /// Set when the confidence matrix condition exceeds 1e12.
    pub conditioning_warning: bool,
}

/// State of the approximate policy iteration learner.
#[derive(Debug, Clone)]
pub struct PiLearner<T: Scalar> {
    iv: IvState<T>,
    gain: Policy<T>,
    n_x: usize,
    n_u: usize,
    on_failure: ImproveFailurePolicy,
}

impl<T: Scalar> PiLearner<T> {
    /// Starts from the Q-parameter guess `θ₀` (confidence `β₀`); the guess
    /// must admit a gain extraction, which becomes the initial policy.
    pub fn new(
        theta0: nalgebra::DVector<T>,
        beta0: T,
        n_x: usize,
        n_u: usize,
        on_failure: ImproveFailurePolicy,
    ) -> Result<Self> {
        if theta0.len() != sd(n_x + n_u) {
            return Err(Error::DimensionMismatch {
                context: "PiLearner theta0",
                expected: sd(n_x + n_u),
                got: theta0.len(),
            });
        }
        let iv = IvState::new(theta0, beta0)?;
        let gain = improve(&iv.theta_matrix(), n_x, n_u)?;
        Ok(Self {
            iv,
            gain,
            n_x,
            n_u,
            on_failure,
        })
    }

    pub fn iv(&self) -> &IvState<T> {
        &self.iv
    }

    /// Gain extracted at the most recent iteration.
    pub fn gain(&self) -> &Policy<T> {
        &self.gain
    }

    fn extract_gain(&mut self) -> Result<bool> {
        match improve(&self.iv.theta_matrix(), self.n_x, self.n_u) {
            Ok(gain) => {
                self.gain = gain;
                Ok(false)
            }
            Err(e) => match self.on_failure {
                ImproveFailurePolicy::KeepPrevious => Ok(true),
                ImproveFailurePolicy::Abort => Err(e),
            },
        }
    }

    fn ingest(&mut self, cost: &CostSpec<T>, samples: &[Sample<T>]) -> Result<usize> {
        let mut skipped = 0;
        for sample in samples {
            let (g, a, b) = iv_regressors(sample, &self.gain, cost.h())?;
            match self.iv.update(&g, &a, b) {
                Ok(()) => {}
                Err(Error::SingularUpdate { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(skipped)
    }

    /// One iteration on an externally supplied batch: extract the gain,
    /// then run the IV recursion over the samples. An empty batch leaves
    /// the estimator untouched.
    pub fn step_with_samples(
        &mut self,
        cost: &CostSpec<T>,
        samples: &[Sample<T>],
    ) -> Result<PiStepInfo<T>> {
        let improvement_failed = self.extract_gain()?;
        let skipped = self.ingest(cost, samples)?;
        Ok(PiStepInfo {
            gain: self.gain.clone(),
            improvement_failed,
            skipped_samples: skipped,
            samples_used: samples.len() - skipped,
            conditioning_warning: self.iv.confidence_condition() > nalgebra::convert(1e12),
        })
    }
}

impl<T: SampleScalar> PiLearner<T> {
    /// One full iteration: extract the gain, roll out under the behavior
    /// policy (`Some(gain)` off-policy, `None` for on-policy, i.e. the
    /// fresh iterate), and ingest the batch.
    pub fn step(
        &mut self,
        sys: &MsSystem<T>,
        cost: &CostSpec<T>,
        rollout_cfg: &RolloutConfig<T>,
        rollout_state: &mut RolloutState<T>,
        behavior: Option<&Policy<T>>,
    ) -> Result<PiStepInfo<T>> {
        let improvement_failed = self.extract_gain()?;
        let behavior_policy = behavior.unwrap_or(&self.gain).clone();
        let samples = generate(sys, rollout_cfg, &behavior_policy, rollout_state)?;
        let skipped = self.ingest(cost, &samples)?;
        Ok(PiStepInfo {
            gain: self.gain.clone(),
            improvement_failed,
            skipped_samples: skipped,
            samples_used: samples.len() - skipped,
            conditioning_warning: self.iv.confidence_condition() > nalgebra::convert(1e12),
        })
    }
}
