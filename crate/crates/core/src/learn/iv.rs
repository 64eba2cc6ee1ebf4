//! Recursive least squares with instrumental variables.
//!
//! The temporal-difference model equation `b = (a + e)ᵀ θ` has regressor
//! noise `e` correlated with `a`, so ordinary least squares is inconsistent.
//! The coordinate vector of the current moment serves as the instrument `g`:
//! it is uncorrelated with the equation error but correlated with the
//! regressor. The rank-one recursion below solves the regularized IV normal
//! equations `Σ gᵢ(aᵢᵀθ - bᵢ) + S₀⁻¹(θ - θ₀) = 0` one sample at a time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact::policy_lift;
use crate::rollout::Sample;
use crate::scalar::{to_f64, Scalar};
use crate::sym::{sd_inverse, SvecVec, SymMat};
use crate::system::Policy;

/// Recursive IV estimator state: the Q-parameter estimate and the
/// confidence matrix `S` (the inverse of the regularized design matrix).
#[derive(Debug, Clone)]
pub struct IvState<T: Scalar> {
    theta_hat: DVector<T>,
    s: DMatrix<T>,
}

impl<T: Scalar> IvState<T> {
    /// Starts from `θ₀` with `S = β₀·I`; `θ₀` must have a triangular length.
    pub fn new(theta0: DVector<T>, beta0: T) -> Result<Self> {
        sd_inverse(theta0.len()).ok_or(Error::NotTriangular { len: theta0.len() })?;
        if beta0 <= T::zero() {
            return Err(Error::InvalidConfig("beta0 must be positive".into()));
        }
        let n = theta0.len();
        Ok(Self {
            theta_hat: theta0,
            s: DMatrix::identity(n, n) * beta0,
        })
    }

    pub fn theta_hat(&self) -> &DVector<T> {
        &self.theta_hat
    }

    pub fn confidence(&self) -> &DMatrix<T> {
        &self.s
    }

    /// Current estimate reshaped to its symmetric Q-matrix.
    pub fn theta_matrix(&self) -> SymMat<T> {
        SvecVec::new(self.theta_hat.clone())
            .expect("length validated at construction")
            .unsvec()
    }

    /// Condition number of `S`, tracked for diagnostics.
    pub fn confidence_condition(&self) -> T {
        let sv = self.s.clone().singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min > T::zero() {
            max / min
        } else {
            nalgebra::convert(f64::INFINITY)
        }
    }

    /// One rank-one recursion step:
    /// `L = S g / (1 + aᵀ S g)`, `θ ← θ + L (b - aᵀθ)`, `S ← S - (L aᵀ) S`.
    pub fn update(&mut self, g: &DVector<T>, a: &DVector<T>, b: T) -> Result<()> {
        let n = self.theta_hat.len();
        if g.len() != n || a.len() != n {
            return Err(Error::DimensionMismatch {
                context: "IvState::update",
                expected: n,
                got: g.len().max(a.len()),
            });
        }
        let s_g = &self.s * g;
        let denominator = T::one() + a.dot(&s_g);
        if denominator.abs() <= nalgebra::convert(1e-12) {
            return Err(Error::SingularUpdate {
                denominator: to_f64(denominator),
            });
        }
        let gain = s_g / denominator;
        let innovation = b - a.dot(&self.theta_hat);
        self.theta_hat += &gain * innovation;
        let a_s = a.transpose() * &self.s;
        self.s -= &gain * a_s;
        Ok(())
    }
}

/// Builds the regression triple of one sample: the instrument
/// `g = svec(Z)`, the regressor `a = svec(Z - lift_π(X⁺))`, and the target
/// `b = tr[H Z]`. The lift uses the policy being evaluated.
pub fn iv_regressors<T: Scalar>(
    sample: &Sample<T>,
    pol_next: &Policy<T>,
    h: &SymMat<T>,
) -> Result<(DVector<T>, DVector<T>, T)> {
    let z_plus = policy_lift(pol_next, &sample.x_plus)?;
    let g = sample.z.svec().into_data();
    let a = (&sample.z - &z_plus).svec().into_data();
    let b = h.dot(&sample.z);
    Ok((g, a, b))
}

fn solve_normal<T: Scalar>(
    design: DMatrix<T>,
    rhs: DVector<T>,
    context: &'static str,
) -> Result<DVector<T>> {
    design.lu().solve(&rhs).ok_or(Error::IllConditioned {
        context,
        condition: f64::INFINITY,
    })
}

/// Unregularized batch IV solve `(Σ g aᵀ)⁻¹ (Σ g b)`.
pub fn batch_iv<T: Scalar>(triples: &[(DVector<T>, DVector<T>, T)]) -> Result<DVector<T>> {
    let n = triples
        .first()
        .map(|(g, _, _)| g.len())
        .ok_or_else(|| Error::InvalidConfig("batch_iv needs samples".into()))?;
    let mut design = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (g, a, b) in triples {
        design += g * a.transpose();
        rhs += g * *b;
    }
    solve_normal(design, rhs, "batch IV solve")
}

/// Ordinary least squares on the noisy regressors, `(Σ a aᵀ)⁻¹ (Σ a b)`.
/// Inconsistent for this model class; kept for demonstration and contrast.
pub fn batch_ols<T: Scalar>(triples: &[(DVector<T>, DVector<T>, T)]) -> Result<DVector<T>> {
    let n = triples
        .first()
        .map(|(_, a, _)| a.len())
        .ok_or_else(|| Error::InvalidConfig("batch_ols needs samples".into()))?;
    let mut design = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (_, a, b) in triples {
        design += a * a.transpose();
        rhs += a * *b;
    }
    solve_normal(design, rhs, "batch OLS solve")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{evaluate_policy, q_matrix, CostSpec};
    use crate::rollout::{generate, RolloutConfig, RolloutMode, RolloutState};
    use crate::system::{MsSystem, NoiseSpec};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn scalar_system(a: f64, b: f64) -> MsSystem<f64> {
        MsSystem::new(
            vec![(
                DMatrix::from_element(1, 1, a),
                DMatrix::from_element(1, 1, b),
            )],
            NoiseSpec::deterministic(),
        )
        .unwrap()
    }

    fn random_triples(n: usize, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>, f64)> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                (
                    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
                    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn regressors_vanish_at_lift_fixed_point() {
        // Z = lift(X⁺) makes the temporal difference regressor zero.
        let pol = Policy::from_row(&[0.4, -0.1]);
        let x = SymMat::from_diagonal(&[1.0, 2.0]);
        let z = policy_lift(&pol, &x).unwrap();
        let sample = Sample {
            z,
            x_plus: x,
            iteration: 0,
            traj: 0,
            step: 0,
            applied_gain: pol.clone(),
        };
        let h = SymMat::identity(3);
        let (_, a, _) = iv_regressors(&sample, &pol, &h).unwrap();
        assert!(a.amax() <= 1e-14);
    }

    #[test]
    fn temporal_difference_identity_without_noise() {
        // On a deterministic system the model equation holds sample-wise at
        // the true Q-parameter.
        let sys = scalar_system(0.6, 0.8);
        let cost = CostSpec::identity(1, 1);
        let pol = Policy::from_row(&[-0.4]);
        let cert = evaluate_policy(&sys, &cost, &pol).unwrap();
        let theta = q_matrix(&sys, &cost, &cert.p).unwrap().svec().into_data();

        let cfg = RolloutConfig {
            trajectories: 3,
            horizon: 10,
            gain_radius: 0.0,
            input_noise_radius: 0.2,
            init_state_radius: 1.0,
            mode: RolloutMode::Reset,
            seed: 17,
        };
        let samples = generate(&sys, &cfg, &pol, &mut RolloutState::new()).unwrap();
        for sample in &samples {
            let (_, a, b) = iv_regressors(sample, &pol, cost.h()).unwrap();
            assert!((b - a.dot(&theta)).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn update_with_zero_instrument_is_identity() {
        let mut state = IvState::new(DVector::from_column_slice(&[1.0, 2.0, 3.0]), 10.0).unwrap();
        let before = state.clone();
        state
            .update(
                &DVector::zeros(3),
                &DVector::from_column_slice(&[1.0, 1.0, 1.0]),
                5.0,
            )
            .unwrap();
        assert_eq!(state.theta_hat(), before.theta_hat());
        assert_eq!(state.confidence(), before.confidence());
    }

    #[test]
    fn update_detects_singular_denominator() {
        let mut state = IvState::new(DVector::zeros(3), 1.0).unwrap();
        let g = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let a = -g.clone();
        match state.update(&g, &a, 1.0) {
            Err(Error::SingularUpdate { denominator }) => assert!(denominator.abs() <= 1e-12),
            other => panic!("expected SingularUpdate, got {other:?}"),
        }
    }

    #[test]
    fn self_instrument_reduces_to_recursive_least_squares() {
        // With g = a the recursion is classical RLS; compare against the
        // regularized normal equations on a tiny problem.
        let beta0 = 50.0;
        let theta0 = DVector::from_column_slice(&[0.3]);
        let mut state = IvState::new(theta0.clone(), beta0).unwrap();
        let data = [(2.0, 1.0), (-1.0, 0.5), (0.5, -0.25)];
        for (a, b) in data {
            let v = DVector::from_column_slice(&[a]);
            state.update(&v, &v, b).unwrap();
        }
        let mut design = 1.0 / beta0;
        let mut rhs = theta0[0] / beta0;
        for (a, b) in data {
            design += a * a;
            rhs += a * b;
        }
        assert_relative_eq!(state.theta_hat()[0], rhs / design, epsilon = 1e-12);
    }

    #[test]
    fn recursion_matches_regularized_batch_solve() {
        let beta0 = 10.0;
        let theta0 = DVector::from_column_slice(&[0.5, -0.5, 0.25, 0.0, 1.0, -1.0]);
        let triples = random_triples(6, 50, 23);

        let mut state = IvState::new(theta0.clone(), beta0).unwrap();
        for (g, a, b) in &triples {
            state.update(g, a, *b).unwrap();
        }

        let mut design = DMatrix::<f64>::identity(6, 6) / beta0;
        let mut rhs = &theta0 / beta0;
        for (g, a, b) in &triples {
            design += g * a.transpose();
            rhs += g * *b;
        }
        let batch = design.clone().lu().solve(&rhs).unwrap();
        let err = (state.theta_hat() - &batch).norm() / batch.norm();
        assert!(err <= 1e-8, "recursive vs batch mismatch: {err}");

        // The confidence matrix is the inverse of the design matrix.
        let identity_check = state.confidence() * design;
        assert_relative_eq!(identity_check, DMatrix::identity(6, 6), epsilon = 1e-8);

        // Regularized normal equations hold at the final estimate.
        let mut residual = (state.theta_hat() - &theta0) / beta0;
        for (g, a, b) in &triples {
            residual += g * (a.dot(state.theta_hat()) - *b);
        }
        assert!(residual.norm() <= 1e-8 * (1.0 + state.theta_hat().norm()));
    }

    #[test]
    fn batch_estimators_on_consistent_data() {
        // When a = g and b = aᵀθ exactly, both estimators recover θ.
        let theta = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let mut rng = StdRng::seed_from_u64(31);
        let triples: Vec<_> = (0..20)
            .map(|_| {
                let a = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let b = a.dot(&theta);
                (a.clone(), a, b)
            })
            .collect();
        assert_relative_eq!(batch_iv(&triples).unwrap(), theta, epsilon = 1e-10);
        assert_relative_eq!(batch_ols(&triples).unwrap(), theta, epsilon = 1e-10);
    }
}
