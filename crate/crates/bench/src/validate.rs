//! Structural invariant suite, runnable from the CLI.
//!
//! Each check prints one PASS/FAIL line; the suite returns whether all
//! checks passed. These are the cheap, always-on counterparts of the
//! statistical experiments: coordinate identities, operator properties,
//! sampler moments, and byte-level determinism of a small run.

use mslqr::rollout::{generate, RolloutConfig, RolloutMode, RolloutState};
use mslqr::system::{MomentMap, Policy};
use mslqr::sym::{sd, SymMat};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{preset, Scale};
use crate::metrics::emit_csv;
use crate::satellite;

fn random_sym(n: usize, rng: &mut StdRng) -> SymMat<f64> {
    SymMat::symmetrized(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
}

fn check_svec_inner_product(rng: &mut StdRng) -> Result<(), String> {
    for n in 1..=6 {
        for _ in 0..50 {
            let x = random_sym(n, rng);
            let y = random_sym(n, rng);
            let via_svec = x.svec().data().dot(y.svec().data());
            let via_trace = x.dot(&y);
            let bound = 1e-10 * x.norm() * y.norm() + 1e-15;
            if (via_svec - via_trace).abs() > bound {
                return Err(format!(
                    "n={n}: svec inner product {via_svec} vs trace {via_trace}"
                ));
            }
            if sd(n) != x.svec().len() {
                return Err(format!("coordinate length mismatch at n={n}"));
            }
        }
    }
    Ok(())
}

fn check_adjoint_identity(rng: &mut StdRng) -> Result<(), String> {
    let sys = satellite::satellite_system();
    for _ in 0..100 {
        let z = random_sym(3, rng);
        let p = random_sym(2, rng);
        let forward = p.dot(&sys.apply(&z).map_err(|e| e.to_string())?);
        let adjoint = sys.apply_adjoint(&p).map_err(|e| e.to_string())?.dot(&z);
        if (forward - adjoint).abs() > 1e-10 * p.norm() * z.norm() + 1e-14 {
            return Err(format!("adjoint identity violated: {forward} vs {adjoint}"));
        }
    }
    Ok(())
}

fn check_rank_one_transition(rng: &mut StdRng) -> Result<(), String> {
    let sys = satellite::satellite_system();
    for _ in 0..200 {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let u = DVector::from_fn(1, |_, _| rng.random_range(-2.0..2.0));
        let w = sys.sample_noise(rng);
        let mut z = DVector::zeros(3);
        z.rows_mut(0, 2).copy_from(&x);
        z.rows_mut(2, 1).copy_from(&u);
        let via_operator = sys
            .sampled(&SymMat::outer(&z), &w)
            .map_err(|e| e.to_string())?;
        let via_step = SymMat::outer(&sys.step(&x, &u, &w).map_err(|e| e.to_string())?);
        let diff = (&via_operator - &via_step).norm();
        if diff > 1e-10 * (1.0 + via_step.norm()) {
            return Err(format!("rank-one transition identity defect {diff}"));
        }
    }
    Ok(())
}

fn check_psd_preservation(rng: &mut StdRng) -> Result<(), String> {
    let sys = satellite::satellite_system();
    for _ in 0..100 {
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let z = SymMat::symmetrized(&g * g.transpose());
        let image = sys.apply(&z).map_err(|e| e.to_string())?;
        let min_eig = image.min_eigenvalue();
        if min_eig < -1e-9 * (1.0 + image.norm()) {
            return Err(format!("PSD input mapped to min eigenvalue {min_eig}"));
        }
    }
    Ok(())
}

fn check_sampler_moments(rng: &mut StdRng) -> Result<(), String> {
    let sys = satellite::satellite_system();
    let target = sys.noise_moment().clone();
    let n = 1_000_000;
    let mut moment = DMatrix::<f64>::zeros(3, 3);
    for _ in 0..n {
        let w = sys.sample_noise(rng);
        moment += &w * w.transpose();
    }
    moment /= n as f64;
    for i in 0..3 {
        for j in 0..3 {
            let t = target.matrix()[(i, j)];
            let stat = 3.0 * (target.matrix()[(i, i)] * target.matrix()[(j, j)] / n as f64).sqrt();
            if (moment[(i, j)] - t).abs() > 0.01 * t.abs() + stat {
                return Err(format!(
                    "noise moment ({i},{j}): empirical {} vs {t}",
                    moment[(i, j)]
                ));
            }
        }
    }

    // Initial-state draws: E[x xᵀ] = r²/(d+2)·I on the ball.
    let r = 1.0;
    let m = 1_000_000;
    let mut acc = DMatrix::<f64>::zeros(2, 2);
    for _ in 0..m {
        let x = mslqr::rollout::ball_draw(2, r, rng);
        acc += &x * x.transpose();
    }
    acc /= m as f64;
    let expected = r * r / 4.0;
    for i in 0..2 {
        let diagonal = acc[(i, i)];
        if (diagonal - expected).abs() > 0.01 * expected {
            return Err(format!("ball moment diagonal {diagonal} vs {expected}"));
        }
    }
    Ok(())
}

fn check_run_determinism() -> Result<(), String> {
    let mut cfg = preset("pi-off-policy", Scale::Desk).expect("preset exists");
    cfg.repeats = 2;
    cfg.iterations = 3;
    cfg.rollout.trajectories = 5;
    cfg.rollout.horizon = 10;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for buf in [&mut first, &mut second] {
        let records = crate::experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
        emit_csv(&records, buf).map_err(|e| e.to_string())?;
    }
    if first != second {
        return Err("two identical runs produced different CSV bytes".into());
    }
    Ok(())
}

fn check_rollout_determinism() -> Result<(), String> {
    let sys = satellite::satellite_system();
    let cfg = RolloutConfig {
        trajectories: 7,
        horizon: 11,
        gain_radius: 0.05,
        input_noise_radius: 0.1,
        init_state_radius: 1.0,
        mode: RolloutMode::Reset,
        seed: 2718,
    };
    let pol = Policy::from_row(&[0.5, -0.75]);
    let a = generate(&sys, &cfg, &pol, &mut RolloutState::new()).map_err(|e| e.to_string())?;
    let b = generate(&sys, &cfg, &pol, &mut RolloutState::new()).map_err(|e| e.to_string())?;
    for (sa, sb) in a.iter().zip(&b) {
        if sa.z.matrix() != sb.z.matrix() || sa.x_plus.matrix() != sb.x_plus.matrix() {
            return Err("rollout batches differ across identical calls".into());
        }
    }
    Ok(())
}

/// Runs every structural check, printing one line each. Returns `true`
/// when all pass.
pub fn run_invariant_suite(seed: u64) -> bool {
    let mut rng = StdRng::seed_from_u64(seed);
    let checks: Vec<(&str, Result<(), String>)> = vec![
        ("svec inner-product identity", check_svec_inner_product(&mut rng)),
        ("moment operator adjoint identity", check_adjoint_identity(&mut rng)),
        ("rank-one transition identity", check_rank_one_transition(&mut rng)),
        ("PSD preservation", check_psd_preservation(&mut rng)),
        ("sampler moment matching", check_sampler_moments(&mut rng)),
        ("rollout batch determinism", check_rollout_determinism()),
        ("experiment byte determinism", check_run_determinism()),
    ];
    let mut all_passed = true;
    for (name, outcome) in checks {
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(reason) => {
                all_passed = false;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    all_passed
}
