//! Data-driven controller synthesis from transition-moment samples.
//!
//! Three learners share the rollout data format:
//!
//! - [`pi`]: approximate policy iteration, estimating the Q-parameter by
//!   recursive instrumental-variable least squares ([`iv`]).
//! - [`si`]: recursive least-squares identification of the moment operator
//!   with certainty-equivalent synthesis.
//! - [`pg`]: zeroth-order natural policy gradient from perturbed rollouts.

pub mod iv;
pub mod pg;
pub mod pi;
pub mod si;

pub use iv::{batch_iv, batch_ols, iv_regressors, IvState};
pub use pg::{pg_gradient, PgGradient, PgScaling, PgState};
pub use pi::{ImproveFailurePolicy, PiLearner, PiStepInfo};
pub use si::{SiState, SiSynthesis};
