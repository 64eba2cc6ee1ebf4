//! The satellite pitch-control benchmark system.

use mslqr::system::{MsSystem, NoiseSpec, Policy};
use mslqr::{CostSpec64, MsSystem64, Policy64};
use nalgebra::{DMatrix, DVector};

/// Discrete-time pitch dynamics with three noise modes: the nominal pair,
/// a state-only perturbation mode, and an input-only perturbation mode.
/// The disturbance is `w = (1, v)` with `v` uniform on an ellipsoid scaled
/// so that `E[v vᵀ] = diag(0.2, 0.5)`.
pub fn satellite_system() -> MsSystem64 {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.43, 0.71, -1.13, 0.43]);
    let b1 = DMatrix::from_row_slice(2, 1, &[0.36, 0.71]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.57, -0.01, 1.13, -0.01]);
    let b2 = DMatrix::zeros(2, 1);
    let a3 = DMatrix::zeros(2, 2);
    let b3 = b1.clone();
    MsSystem::new(
        vec![(a1, b1), (a2, b2), (a3, b3)],
        NoiseSpec::ConstantPlusEllipsoid {
            v_moment_diag: DVector::from_column_slice(&[0.2, 0.5]),
        },
    )
    .expect("satellite system is well formed")
}

/// The stabilizing reference gain used to generate off-policy data.
pub fn reference_gain() -> Policy64 {
    Policy::from_row(&[0.5, -0.75])
}

/// Identity weights; the benchmark never specifies anything else.
pub fn default_cost() -> CostSpec64 {
    CostSpec64::identity(2, 1)
}

/// Q-parameter initial guess whose gain extraction equals the reference
/// gain.
pub fn initial_theta() -> Vec<f64> {
    vec![10.0, 0.0, -2.8284, 4.0, 4.2426, 4.0]
}
