//! Model-based control for a known (or estimated) moment operator:
//! policy evaluation through a dense Lyapunov solve in svec coordinates,
//! policy improvement from the Q-matrix, and exact policy iteration to the
//! fixed point of the generalized Riccati equation.
//!
//! Everything is generic over [`MomentMap`], so the same routines serve the
//! true system model and least-squares estimates of it.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};
use crate::sym::SymMat;
use crate::system::{closed_loop_matrix, spectral_radius, MomentMap, Policy};

/// Quadratic stage cost `xᵀQx + uᵀRu`, with the block-diagonal augmented
/// form cached.
#[derive(Debug, Clone)]
pub struct CostSpec<T: Scalar> {
    q: SymMat<T>,
    r: SymMat<T>,
    h: SymMat<T>,
}

fn strict_pd_tolerance<T: Scalar>() -> T {
    let spec: T = nalgebra::convert(1e-12);
    spec.max(T::default_epsilon() * nalgebra::convert(16.0))
}

impl<T: Scalar> CostSpec<T> {
    /// Requires `Q ≻ 0` and `R ≻ 0` strictly.
    pub fn new(q: SymMat<T>, r: SymMat<T>) -> Result<Self> {
        let q_min = q.min_eigenvalue();
        if q_min <= strict_pd_tolerance::<T>() {
            return Err(Error::NotPositiveDefinite {
                context: "state cost Q",
                min_eigenvalue: to_f64(q_min),
            });
        }
        let r_min = r.min_eigenvalue();
        if r_min <= strict_pd_tolerance::<T>() {
            return Err(Error::NotPositiveDefinite {
                context: "input cost R",
                min_eigenvalue: to_f64(r_min),
            });
        }
        let (n_x, n_u) = (q.dim(), r.dim());
        let mut h = DMatrix::zeros(n_x + n_u, n_x + n_u);
        h.view_mut((0, 0), (n_x, n_x)).copy_from(q.matrix());
        h.view_mut((n_x, n_x), (n_u, n_u)).copy_from(r.matrix());
        Ok(Self {
            q,
            r,
            h: SymMat::symmetrized(h),
        })
    }

    /// Identity weights on state and input.
    pub fn identity(n_x: usize, n_u: usize) -> Self {
        Self::new(SymMat::identity(n_x), SymMat::identity(n_u)).expect("identity is PD")
    }

    pub fn state_dim(&self) -> usize {
        self.q.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.r.dim()
    }

    pub fn q(&self) -> &SymMat<T> {
        &self.q
    }

    pub fn r(&self) -> &SymMat<T> {
        &self.r
    }

    /// Block-diagonal cost on the augmented moment.
    pub fn h(&self) -> &SymMat<T> {
        &self.h
    }
}

/// Result of a policy evaluation or of policy iteration: the value Hessian,
/// its Q-matrix, the associated gain, and the generalized Riccati residual
/// of the value Hessian (small only at the optimum).
#[derive(Debug, Clone)]
pub struct ValueCertificate<T: Scalar> {
    pub p: SymMat<T>,
    pub theta: SymMat<T>,
    pub policy: Policy<T>,
    pub residual: T,
}

impl<T: Scalar> ValueCertificate<T> {
    /// Expected infinite-horizon cost from `E[x₀x₀ᵀ] = I`.
    pub fn cost_at_identity(&self) -> T {
        self.p.trace()
    }
}

/// Embeds a state moment into the augmented moment under feedback:
/// `X ↦ [I; K] X [I; K]ᵀ`.
pub fn policy_lift<T: Scalar>(pol: &Policy<T>, x: &SymMat<T>) -> Result<SymMat<T>> {
    if x.dim() != pol.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "policy_lift",
            expected: pol.state_dim(),
            got: x.dim(),
        });
    }
    let l = pol.lift_matrix();
    Ok(SymMat::symmetrized(&l * x.matrix() * l.transpose()))
}

/// Adjoint of [`policy_lift`]: `M ↦ [I; K]ᵀ M [I; K]`, i.e.
/// `M_xx + Kᵀ M_ux + M_uxᵀ K + Kᵀ M_uu K`.
pub fn policy_adjoint<T: Scalar>(pol: &Policy<T>, m: &SymMat<T>) -> Result<SymMat<T>> {
    let n_z = pol.state_dim() + pol.input_dim();
    if m.dim() != n_z {
        return Err(Error::DimensionMismatch {
            context: "policy_adjoint",
            expected: n_z,
            got: m.dim(),
        });
    }
    let l = pol.lift_matrix();
    Ok(SymMat::symmetrized(l.transpose() * m.matrix() * l))
}

fn psd_slack_tolerance<T: Scalar>() -> T {
    let spec: T = nalgebra::convert(1e-9);
    spec.max(T::default_epsilon() * nalgebra::convert(1e4))
}

/// Solves the closed-loop fixed point `P = liftᵀ(H + adjoint(P))` for a
/// mean-square stabilizing policy, as a dense linear system in svec
/// coordinates.
pub fn evaluate_policy<T: Scalar, O: MomentMap<T>>(
    op: &O,
    cost: &CostSpec<T>,
    pol: &Policy<T>,
) -> Result<ValueCertificate<T>> {
    if cost.state_dim() != op.state_dim() || cost.input_dim() != op.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "evaluate_policy cost",
            expected: op.state_dim(),
            got: cost.state_dim(),
        });
    }
    let t_k = closed_loop_matrix(op, pol)?;
    let rho = spectral_radius(&t_k);
    if rho >= T::one() - nalgebra::convert(1e-9) {
        return Err(Error::NotStabilizing {
            spectral_radius: to_f64(rho),
        });
    }

    let n = t_k.nrows();
    let system = DMatrix::identity(n, n) - t_k.transpose();
    let singulars = system.clone().singular_values();
    let (s_max, s_min) = (singulars.max(), singulars.min());
    let condition = if s_min > T::zero() {
        s_max / s_min
    } else {
        nalgebra::convert(f64::INFINITY)
    };
    if condition > nalgebra::convert(1e12) {
        return Err(Error::IllConditioned {
            context: "policy evaluation",
            condition: to_f64(condition),
        });
    }

    let rhs = policy_adjoint(pol, cost.h())?.svec().into_data();
    let p_vec = system.lu().solve(&rhs).ok_or(Error::IllConditioned {
        context: "policy evaluation solve",
        condition: to_f64(condition),
    })?;
    let p = crate::sym::SvecVec::new(p_vec)
        .expect("solution length is triangular")
        .unsvec();

    // Fixed-point residual and positive semidefiniteness guard the solve.
    let theta = q_matrix(op, cost, &p)?;
    let reconstructed = policy_adjoint(pol, &theta)?;
    let defect = (&p - &reconstructed).norm();
    let scale = p.norm().max(T::one());
    if defect > nalgebra::convert::<f64, T>(1e-9) * scale {
        return Err(Error::IllConditioned {
            context: "policy evaluation residual",
            condition: to_f64(defect / scale),
        });
    }
    if !p.is_psd(psd_slack_tolerance::<T>()) {
        return Err(Error::NotPositiveDefinite {
            context: "value matrix",
            min_eigenvalue: to_f64(p.min_eigenvalue()),
        });
    }

    let residual =
        riccati_residual(op, cost, &p).unwrap_or_else(|_| nalgebra::convert(f64::INFINITY));
    Ok(ValueCertificate {
        p,
        theta,
        policy: pol.clone(),
        residual,
    })
}

/// Q-matrix of a value Hessian: `Θ = H + adjoint(P)`.
pub fn q_matrix<T: Scalar, O: MomentMap<T>>(
    op: &O,
    cost: &CostSpec<T>,
    p: &SymMat<T>,
) -> Result<SymMat<T>> {
    let lifted = op.apply_adjoint(p)?;
    Ok(cost.h() + &lifted)
}

fn improve_tolerance<T: Scalar>() -> T {
    let spec: T = nalgebra::convert(1e-10);
    spec.max(T::default_epsilon() * nalgebra::convert(1e3))
}

/// Greedy gain of a Q-matrix: `K = -Θ_uu⁻¹ Θ_ux`. Requires `Θ_uu ≻ 0`.
pub fn improve<T: Scalar>(theta: &SymMat<T>, n_x: usize, n_u: usize) -> Result<Policy<T>> {
    let (_, theta_ux, theta_uu) = theta.blocks(n_x, n_u)?;
    let min_eig = theta_uu.min_eigenvalue();
    if min_eig <= improve_tolerance::<T>() {
        return Err(Error::ImprovementUndefined(format!(
            "input block not positive definite (min eigenvalue {:.3e})",
            to_f64(min_eig)
        )));
    }
    let chol = theta_uu
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::ImprovementUndefined("input block Cholesky failed".into()))?;
    let gain = -chol.solve(&theta_ux);
    Policy::new(gain)
}

/// Error of [`exact_policy_iteration`], carrying the last complete iterate
/// when one exists.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct PiFailure<T: Scalar> {
    pub source: Error,
    pub last: Option<Box<ValueCertificate<T>>>,
}

impl<T: Scalar> PiFailure<T> {
    fn new(source: Error, last: &Option<ValueCertificate<T>>) -> Self {
        Self {
            source,
            last: last.clone().map(Box::new),
        }
    }
}

/// Policy iteration on a known moment operator: evaluate, form the
/// Q-matrix, improve, until the gain stops moving. The returned
/// certificate's `residual` is the generalized Riccati residual at the
/// fixed point.
pub fn exact_policy_iteration<T: Scalar, O: MomentMap<T>>(
    op: &O,
    cost: &CostSpec<T>,
    k_init: &Policy<T>,
    max_iter: usize,
    tol: T,
) -> Result<ValueCertificate<T>, PiFailure<T>> {
    let mut policy = k_init.clone();
    let mut last: Option<ValueCertificate<T>> = None;
    for _ in 0..max_iter {
        let evaluated =
            evaluate_policy(op, cost, &policy).map_err(|e| PiFailure::new(e, &last))?;
        let improved = improve(&evaluated.theta, op.state_dim(), op.input_dim())
            .map_err(|e| PiFailure::new(e, &last))?;
        let delta = (improved.gain() - policy.gain()).norm();
        let converged = delta <= tol;
        policy = improved.clone();
        last = Some(ValueCertificate {
            policy: improved,
            ..evaluated
        });
        if converged {
            return Ok(last.expect("just set"));
        }
    }
    Err(PiFailure::new(
        Error::MaxIterations {
            iterations: max_iter,
        },
        &last,
    ))
}

/// Frobenius norm of the generalized Riccati defect of `P`:
/// `‖P - Q - G_xx + G_uxᵀ (R + G_uu)⁻¹ G_ux‖_F` with `G = adjoint(P)`.
pub fn riccati_residual<T: Scalar, O: MomentMap<T>>(
    op: &O,
    cost: &CostSpec<T>,
    p: &SymMat<T>,
) -> Result<T> {
    let g = op.apply_adjoint(p)?;
    let (g_xx, g_ux, g_uu) = g.blocks(op.state_dim(), op.input_dim())?;
    let inner = cost.r() + &g_uu;
    let min_eig = inner.min_eigenvalue();
    if min_eig <= improve_tolerance::<T>() {
        return Err(Error::NotPositiveDefinite {
            context: "riccati inner matrix",
            min_eigenvalue: to_f64(min_eig),
        });
    }
    let chol = inner
        .matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            context: "riccati inner matrix",
            min_eigenvalue: to_f64(min_eig),
        })?;
    let correction = SymMat::symmetrized(g_ux.transpose() * chol.solve(&g_ux));
    let defect = &(&(p - cost.q()) - &g_xx) + &correction;
    Ok(defect.norm())
}

/// Relative excess cost of a policy against a reference optimum,
/// `(tr P_π - tr P*) / tr P*`. Evaluation failures (in particular a
/// non-stabilizing policy) map to `+∞`.
pub fn relative_suboptimality<T: Scalar, O: MomentMap<T>>(
    op: &O,
    cost: &CostSpec<T>,
    pol: &Policy<T>,
    reference: &ValueCertificate<T>,
) -> T {
    match evaluate_policy(op, cost, pol) {
        Ok(cert) => {
            (cert.cost_at_identity() - reference.cost_at_identity()) / reference.cost_at_identity()
        }
        Err(_) => nalgebra::convert(f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{MsSystem, NoiseSpec};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
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

    fn random_psd(n: usize, rng: &mut StdRng) -> SymMat<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMat::symmetrized(&g * g.transpose())
    }

    #[test]
    fn cost_spec_rejects_semidefinite() {
        assert!(CostSpec::new(SymMat::from_diagonal(&[1.0, 0.0]), SymMat::identity(1)).is_err());
        assert!(CostSpec::new(SymMat::identity(2), SymMat::from_diagonal(&[-1.0])).is_err());
    }

    #[test]
    fn lift_examples() {
        let x = SymMat::identity(2);
        let zero_gain = Policy::zero(1, 2);
        let lifted = policy_lift(&zero_gain, &x).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected
            .view_mut((0, 0), (2, 2))
            .copy_from(&DMatrix::identity(2, 2));
        assert_eq!(lifted.matrix(), &expected);

        let k = Policy::from_row(&[0.5, -0.75]);
        let lifted = policy_lift(&k, &x).unwrap();
        let (xx, ux, uu) = lifted.blocks(2, 1).unwrap();
        assert_relative_eq!(xx.matrix(), &DMatrix::identity(2, 2), epsilon = 1e-14);
        assert_relative_eq!(
            ux,
            DMatrix::from_row_slice(1, 2, &[0.5, -0.75]),
            epsilon = 1e-14
        );
        assert_relative_eq!(uu.matrix()[(0, 0)], 0.8125, epsilon = 1e-14);
    }

    #[test]
    fn lift_preserves_rank() {
        let mut rng = StdRng::seed_from_u64(20);
        let k = Policy::new(DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        for _ in 0..10 {
            let z = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let x = SymMat::outer(&z);
            let lifted = policy_lift(&k, &x).unwrap();
            let eigs = lifted.eigenvalues();
            let nonzero = eigs.iter().filter(|&&e: &&f64| e.abs() > 1e-10).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn adjoint_identity_and_examples() {
        let mut rng = StdRng::seed_from_u64(21);
        let k = Policy::new(DMatrix::from_fn(1, 2, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        for _ in 0..30 {
            let x = random_psd(2, &mut rng);
            let m = random_psd(3, &mut rng);
            let lhs = m.dot(&policy_lift(&k, &x).unwrap());
            let rhs = policy_adjoint(&k, &m).unwrap().dot(&x);
            assert!((lhs - rhs).abs() <= 1e-10 * m.norm() * x.norm() + 1e-14);
        }

        let zero_gain = Policy::zero(1, 2);
        let m = random_psd(3, &mut rng);
        let adj = policy_adjoint(&zero_gain, &m).unwrap();
        let (m_xx, _, _) = m.blocks(2, 1).unwrap();
        assert_relative_eq!(adj.matrix(), m_xx.matrix(), epsilon = 1e-14);

        let cost = CostSpec::identity(2, 1);
        let adj_h = policy_adjoint(&zero_gain, cost.h()).unwrap();
        assert_relative_eq!(adj_h.matrix(), cost.q().matrix(), epsilon = 1e-14);
    }

    #[test]
    fn evaluate_scalar_geometric_series() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let cert = evaluate_policy(&sys, &cost, &Policy::from_row(&[0.0])).unwrap();
        assert_relative_eq!(cert.p.matrix()[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_scalar_deadbeat() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let cert = evaluate_policy(&sys, &cost, &Policy::from_row(&[-0.5])).unwrap();
        assert_relative_eq!(cert.p.matrix()[(0, 0)], 1.25, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_rejects_unstable_policy() {
        let sys = scalar_system(2.0, 0.0);
        let cost = CostSpec::identity(1, 1);
        match evaluate_policy(&sys, &cost, &Policy::from_row(&[0.0])) {
            Err(Error::NotStabilizing { spectral_radius }) => assert!(spectral_radius >= 1.0),
            other => panic!("expected NotStabilizing, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_matches_truncated_series() {
        // P equals the truncated Neumann series of the closed-loop recursion.
        let mut rng = StdRng::seed_from_u64(22);
        let sys = MsSystem::new(
            vec![
                (
                    DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.4..0.4)),
                    DMatrix::from_fn(2, 1, |_, _| rng.random_range(-0.4..0.4)),
                ),
                (
                    DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.2..0.2)),
                    DMatrix::from_fn(2, 1, |_, _| rng.random_range(-0.2..0.2)),
                ),
            ],
            NoiseSpec::Gaussian {
                mean: DVector::from_column_slice(&[1.0, 0.0]),
                cov: SymMat::from_diagonal(&[0.05, 0.1]),
            },
        )
        .unwrap();
        let cost = CostSpec::identity(2, 1);
        let pol = Policy::zero(1, 2);
        let cert = evaluate_policy(&sys, &cost, &pol).unwrap();

        let t_k = closed_loop_matrix(&sys, &pol).unwrap();
        let base = policy_adjoint(&pol, cost.h()).unwrap().svec().into_data();
        let mut acc = base.clone();
        let mut term = base;
        for _ in 0..10_000 {
            term = t_k.transpose() * term;
            acc += &term;
        }
        let series = crate::sym::SvecVec::new(acc).unwrap().unsvec();
        assert_relative_eq!(cert.p.matrix(), series.matrix(), epsilon = 1e-8);
    }

    #[test]
    fn bellman_consistency() {
        let mut rng = StdRng::seed_from_u64(23);
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let pol = Policy::from_row(&[-0.3]);
        let cert = evaluate_policy(&sys, &cost, &pol).unwrap();
        for _ in 0..20 {
            let x = random_psd(1, &mut rng);
            let lifted = policy_lift(&pol, &x).unwrap();
            let lhs = x.dot(&cert.p);
            let rhs = lifted.dot(cost.h()) + cert.p.dot(&sys.apply(&lifted).unwrap());
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn q_matrix_examples() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);

        let theta0 = q_matrix(&sys, &cost, &SymMat::zeros(1)).unwrap();
        assert_relative_eq!(theta0.matrix(), cost.h().matrix(), epsilon = 1e-14);

        let p = SymMat::from_diagonal(&[4.0 / 3.0]);
        let theta = q_matrix(&sys, &cost, &p).unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[1.0 + 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0 + 4.0 / 3.0],
        );
        assert_relative_eq!(theta.matrix(), &expected, epsilon = 1e-12);

        // Defining identity on random moments.
        let mut rng = StdRng::seed_from_u64(24);
        for _ in 0..20 {
            let z = random_psd(2, &mut rng);
            let lhs = theta.dot(&z);
            let rhs = z.dot(cost.h()) + p.dot(&sys.apply(&z).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn improve_examples() {
        // The reference initial Q-matrix extracts the reference gain.
        let theta = crate::sym::SvecVec::from_slice(&[10.0, 0.0, -2.8284, 4.0, 4.2426, 4.0])
            .unwrap()
            .unsvec();
        let k = improve(&theta, 2, 1).unwrap();
        assert_relative_eq!(k.gain()[(0, 0)], 0.5, epsilon = 1e-4);
        assert_relative_eq!(k.gain()[(0, 1)], -0.75, epsilon = 1e-4);

        // Zero cross block gives the zero gain.
        let diag = SymMat::from_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(improve(&diag, 2, 1).unwrap().gain(), &DMatrix::zeros(1, 2));

        // Scalar example from the Q-matrix above.
        let theta = SymMat::new(DMatrix::from_row_slice(
            2,
            2,
            &[1.0 + 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0 + 4.0 / 3.0],
        ))
        .unwrap();
        let k = improve(&theta, 1, 1).unwrap();
        assert_relative_eq!(k.gain()[(0, 0)], -2.0 / 7.0, epsilon = 1e-12);

        // Indefinite input block is rejected.
        let bad = SymMat::from_diagonal(&[1.0, 1.0, -0.5]);
        assert!(matches!(
            improve(&bad, 2, 1),
            Err(Error::ImprovementUndefined(_))
        ));
    }

    #[test]
    fn exact_pi_scalar_analytic_root() {
        // Fixed point of p = 1 + p/4 - (p/2)^2/(1+p), i.e. the positive
        // root of p^2 - p/4 - 1 = 0.
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let expected = (0.25 + 4.0625_f64.sqrt()) / 2.0;
        let cert =
            exact_policy_iteration(&sys, &cost, &Policy::from_row(&[0.0]), 200, 1e-12).unwrap();
        assert_relative_eq!(cert.p.matrix()[(0, 0)], expected, epsilon = 1e-10);
        assert!(cert.residual < 1e-10);
        assert!(riccati_residual(&sys, &cost, &cert.p).unwrap() < 1e-10);
    }

    #[test]
    fn exact_pi_without_control_authority() {
        let sys = scalar_system(0.5, 0.0);
        let cost = CostSpec::identity(1, 1);
        let cert =
            exact_policy_iteration(&sys, &cost, &Policy::from_row(&[0.0]), 200, 1e-12).unwrap();
        let eval = evaluate_policy(&sys, &cost, &Policy::from_row(&[0.0])).unwrap();
        assert_relative_eq!(
            cert.p.matrix()[(0, 0)],
            eval.p.matrix()[(0, 0)],
            epsilon = 1e-12
        );
        assert_eq!(cert.policy.gain()[(0, 0)], 0.0);
    }

    #[test]
    fn exact_pi_cost_is_monotone() {
        let sys = scalar_system(0.7, 0.9);
        let cost = CostSpec::identity(1, 1);
        let mut policy = Policy::from_row(&[-0.2]);
        let mut previous = f64::INFINITY;
        for _ in 0..30 {
            let cert = evaluate_policy(&sys, &cost, &policy).unwrap();
            let value = cert.cost_at_identity();
            assert!(value <= previous + 1e-9);
            previous = value;
            policy = improve(&cert.theta, 1, 1).unwrap();
        }
    }

    #[test]
    fn exact_pi_max_iter_carries_last() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let failure =
            exact_policy_iteration(&sys, &cost, &Policy::from_row(&[0.0]), 1, 0.0).unwrap_err();
        assert!(matches!(failure.source, Error::MaxIterations { .. }));
        assert!(failure.last.is_some());
    }

    #[test]
    fn exact_pi_rejects_unstable_start() {
        let sys = scalar_system(1.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let failure =
            exact_policy_iteration(&sys, &cost, &Policy::from_row(&[1.0]), 50, 1e-12).unwrap_err();
        assert!(matches!(failure.source, Error::NotStabilizing { .. }));
        assert!(failure.last.is_none());
    }

    #[test]
    fn improvement_minimizes_q_form() {
        // Any perturbed gain scores no better on the lifted Q-form.
        let mut rng = StdRng::seed_from_u64(25);
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let cert = evaluate_policy(&sys, &cost, &Policy::from_row(&[-0.1])).unwrap();
        let best = improve(&cert.theta, 1, 1).unwrap();
        for _ in 0..50 {
            let x = random_psd(1, &mut rng);
            let delta = if rng.random_bool(0.5) { 1e-3 } else { -1e-3 };
            let perturbed = Policy::from_row(&[best.gain()[(0, 0)] + delta]);
            let value_best = policy_lift(&best, &x).unwrap().dot(&cert.theta);
            let value_perturbed = policy_lift(&perturbed, &x).unwrap().dot(&cert.theta);
            assert!(value_perturbed >= value_best - 1e-12);
        }
    }

    #[test]
    fn riccati_residual_examples() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        assert_relative_eq!(
            riccati_residual(&sys, &cost, &SymMat::zeros(1)).unwrap(),
            cost.q().norm(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn relative_suboptimality_scalar() {
        let sys = scalar_system(0.5, 1.0);
        let cost = CostSpec::identity(1, 1);
        let reference =
            exact_policy_iteration(&sys, &cost, &Policy::from_row(&[0.0]), 200, 1e-12).unwrap();

        let at_optimum = relative_suboptimality(&sys, &cost, &reference.policy, &reference);
        assert!(at_optimum.abs() <= 1e-9);

        // Frozen from the analytic values: P(K=0) = 4/3 and
        // P* = (0.25 + sqrt(4.0625))/2.
        let p_star = (0.25 + 4.0625_f64.sqrt()) / 2.0;
        let expected = (4.0 / 3.0 - p_star) / p_star;
        let at_zero = relative_suboptimality(&sys, &cost, &Policy::from_row(&[0.0]), &reference);
        assert_relative_eq!(at_zero, expected, epsilon = 1e-9);
        assert_relative_eq!(at_zero, 0.17704295804975828, epsilon = 1e-9);
        assert!(at_zero >= -1e-9);

        // Non-stabilizing policies map to the infinite sentinel.
        let diverging = relative_suboptimality(
            &scalar_system(2.0, 0.0),
            &cost,
            &Policy::from_row(&[0.0]),
            &reference,
        );
        assert!(diverging.is_infinite());
    }
}
