//! Quadratic regulation of linear systems with state- and
//! input-multiplicative noise.
//!
//! The crate provides:
//!
//! - [`sym`]: symmetric matrices and the orthonormal `svec` coordinates.
//! - [`system`]: the noisy linear system, its second-moment operator, and
//!   mean-square stability analysis.
//! - [`exact`]: model-based policy evaluation, improvement, and exact policy
//!   iteration to the generalized Riccati fixed point.
//! - [`rollout`]: seeded, reproducible trajectory simulation producing
//!   transition-moment sample pairs.
//! - [`learn`]: data-driven controller synthesis (policy iteration with
//!   instrumental-variable least squares, system identification, and natural
//!   policy gradient).
//!
//! All numerics are generic over the scalar type ([`Scalar`], `f32`/`f64`);
//! the `*64` aliases below fix the default double-precision instantiation.

pub mod error;
pub mod exact;
pub mod learn;
pub mod rollout;
pub mod sampling;
pub mod scalar;
pub mod sym;
pub mod system;

pub use error::{Error, Result};
pub use scalar::{SampleScalar, Scalar};

pub type SymMat64 = sym::SymMat<f64>;
pub type SvecVec64 = sym::SvecVec<f64>;
pub type MsSystem64 = system::MsSystem<f64>;
pub type Policy64 = system::Policy<f64>;
pub type CpOperator64 = system::CpOperator<f64>;
pub type CostSpec64 = exact::CostSpec<f64>;
pub type ValueCertificate64 = exact::ValueCertificate<f64>;
pub type IvState64 = learn::IvState<f64>;
pub type SiState64 = learn::SiState<f64>;
pub type PgState64 = learn::PgState<f64>;





