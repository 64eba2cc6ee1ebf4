//! Experiment execution: repeated seeded runs of one learner against the
//! exact model-based reference, producing one metrics row per iteration.

use std::time::Instant;

use mslqr::exact::{exact_policy_iteration, relative_suboptimality, CostSpec};
use mslqr::learn::{pg_gradient, ImproveFailurePolicy, PgState, PiLearner, SiState};
use mslqr::rollout::{generate, RolloutConfig, RolloutState};
use mslqr::system::{is_ms_stabilizing, Policy};
use mslqr::sym::SymMat;
use mslqr::{CostSpec64, MsSystem64, Policy64, ValueCertificate64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InstabilityConfig, LearnerConfig, SystemSelector};
use crate::error::{BenchError, Result};
use crate::metrics::{sort_records, InstabilityRecord, MetricsRecord};
use crate::satellite;

/// Everything shared across the repeats of one experiment.
pub struct ExperimentContext {
    pub system: MsSystem64,
    pub cost: CostSpec64,
    pub behavior: Policy64,
    /// Exact optimum, the baseline of every metric.
    pub reference: ValueCertificate64,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(BenchError::InvalidExperiment("malformed matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Builds the system, cost, behavior gain, and the exact reference optimum.
pub fn prepare(cfg: &ExperimentConfig) -> Result<ExperimentContext> {
    let system = match &cfg.system {
        SystemSelector::Satellite => satellite::satellite_system(),
        SystemSelector::Custom(spec) => spec.build()?,
    };
    let (n_x, n_u) = (system.state_dim(), system.input_dim());
    let cost = match &cfg.cost {
        Some(section) => CostSpec::new(
            SymMat::new(matrix_from_rows(&section.q)?)?,
            SymMat::new(matrix_from_rows(&section.r)?)?,
        )?,
        None => CostSpec::identity(n_x, n_u),
    };
    let behavior = Policy::new(matrix_from_rows(&cfg.behavior.gain)?)?;
    if behavior.state_dim() != n_x || behavior.input_dim() != n_u {
        return Err(BenchError::InvalidExperiment(format!(
            "behavior gain must be {n_u}x{n_x}"
        )));
    }

    let reference = exact_policy_iteration(&system, &cost, &behavior, 200, 1e-12)
        .map_err(|failure| BenchError::Core(failure.source))?;
    let self_check = relative_suboptimality(&system, &cost, &reference.policy, &reference);
    if self_check.abs() > 1e-9 {
        return Err(BenchError::InvalidExperiment(format!(
            "reference optimum inconsistent: self suboptimality {self_check:.3e}"
        )));
    }
    Ok(ExperimentContext {
        system,
        cost,
        behavior,
        reference,
    })
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut state = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    state = (state ^ (state >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    state = (state ^ (state >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    state ^ (state >> 31)
}

use mslqr::system::MomentMap;

fn row(
    cfg: &ExperimentConfig,
    ctx: &ExperimentContext,
    repeat: usize,
    iteration: usize,
    samples: u64,
    gain: &Policy64,
    started: Instant,
) -> MetricsRecord {
    let stable = is_ms_stabilizing(&ctx.system, gain).unwrap_or(false);
    let suboptimality = relative_suboptimality(&ctx.system, &ctx.cost, gain, &ctx.reference);
    let gain_error = spectral_norm(&(gain.gain() - ctx.reference.policy.gain()))
        / spectral_norm(ctx.reference.policy.gain());
    MetricsRecord {
        experiment: cfg.id.clone(),
        learner: cfg.learner_name().into(),
        repeat,
        iteration,
        samples,
        suboptimality,
        gain_error,
        stable,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

fn rollout_config(cfg: &ExperimentConfig, seed: u64) -> RolloutConfig<f64> {
    RolloutConfig {
        trajectories: cfg.rollout.trajectories,
        horizon: cfg.rollout.horizon,
        gain_radius: cfg.rollout.gain_radius,
        input_noise_radius: cfg.rollout.input_noise_radius,
        init_state_radius: cfg.rollout.init_state_radius,
        mode: cfg.rollout.mode,
        seed,
    }
}

fn run_repeat(
    cfg: &ExperimentConfig,
    ctx: &ExperimentContext,
    repeat: usize,
) -> Result<Vec<MetricsRecord>> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, repeat as u64);
    let rollout_cfg = rollout_config(cfg, seed);
    let per_iteration = (cfg.rollout.trajectories * cfg.rollout.horizon) as u64;
    let (n_x, n_u) = (ctx.system.state_dim(), ctx.system.input_dim());
    let mut rows = Vec::with_capacity(cfg.iterations + 1);

    match &cfg.learner {
        LearnerConfig::Pi {
            beta0,
            theta0,
            on_policy,
        } => {
            let mut learner = PiLearner::new(
                DVector::from_column_slice(theta0),
                *beta0,
                n_x,
                n_u,
                ImproveFailurePolicy::KeepPrevious,
            )?;
            let mut rollout_state = RolloutState::new();
            rows.push(row(cfg, ctx, repeat, 0, 0, learner.gain(), started));
            for iteration in 1..=cfg.iterations {
                let behavior = (!on_policy).then_some(&ctx.behavior);
                let info = learner.step(
                    &ctx.system,
                    &ctx.cost,
                    &rollout_cfg,
                    &mut rollout_state,
                    behavior,
                )?;
                rows.push(row(
                    cfg,
                    ctx,
                    repeat,
                    iteration,
                    iteration as u64 * per_iteration,
                    &info.gain,
                    started,
                ));
            }
        }
        LearnerConfig::Si { prior_variance } => {
            let mut state = SiState::new(n_x, n_u, *prior_variance)?;
            let mut rollout_state = RolloutState::new();
            let mut gain = state.synthesize(&ctx.cost, &Policy::zero(n_u, n_x)).policy;
            rows.push(row(cfg, ctx, repeat, 0, 0, &gain, started));
            for iteration in 1..=cfg.iterations {
                let samples = generate(&ctx.system, &rollout_cfg, &ctx.behavior, &mut rollout_state)?;
                for sample in &samples {
                    state.update(sample)?;
                }
                gain = state.synthesize(&ctx.cost, &gain).policy;
                rows.push(row(
                    cfg,
                    ctx,
                    repeat,
                    iteration,
                    iteration as u64 * per_iteration,
                    &gain,
                    started,
                ));
            }
        }
        LearnerConfig::Pg { step_size, scaling } => {
            let mut pg = PgState::new(ctx.behavior.clone(), *step_size, (*scaling).into())?;
            let mut rollout_state = RolloutState::new();
            rows.push(row(cfg, ctx, repeat, 0, 0, pg.gain(), started));
            for iteration in 1..=cfg.iterations {
                // Divergence of every rollout or a non-finite update keeps
                // the previous gain; the row still reports this iteration.
                if let Ok(estimate) =
                    pg_gradient(&ctx.system, &ctx.cost, pg.gain(), &rollout_cfg, &mut rollout_state)
                {
                    let _ = pg.step(&estimate.grad, &estimate.sigma);
                }
                rows.push(row(
                    cfg,
                    ctx,
                    repeat,
                    iteration,
                    iteration as u64 * per_iteration,
                    pg.gain(),
                    started,
                ));
            }
        }
    }
    Ok(rows)
}

/// Runs all repeats (in parallel, seeds derived per repeat) and returns the
/// records in canonical order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let ctx = prepare(cfg)?;
    let per_repeat: Vec<Result<Vec<MetricsRecord>>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|repeat| run_repeat(cfg, &ctx, repeat))
        .collect();
    let mut records = Vec::new();
    for result in per_repeat {
        records.extend(result?);
    }
    sort_records(&mut records);
    Ok(records)
}

fn instability_repeat(
    cfg: &InstabilityConfig,
    beta_index: usize,
    beta0: f64,
    repeat: usize,
) -> Result<Vec<bool>> {
    let system = satellite::satellite_system();
    let cost = satellite::default_cost();
    let behavior = satellite::reference_gain();
    let seed = derive_seed(cfg.seed ^ (beta_index as u64).wrapping_mul(0xd6e8_feb8_6659_fd93), repeat as u64);
    let rollout_cfg = RolloutConfig {
        trajectories: cfg.trajectories,
        horizon: cfg.horizon,
        gain_radius: 0.0,
        input_noise_radius: 0.1,
        init_state_radius: 1.0,
        mode: mslqr::rollout::RolloutMode::Reset,
        seed,
    };
    let mut learner = PiLearner::new(
        DVector::from_column_slice(&satellite::initial_theta()),
        beta0,
        2,
        1,
        ImproveFailurePolicy::KeepPrevious,
    )?;
    let mut rollout_state = RolloutState::new();
    let mut unstable = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let info = learner.step(&system, &cost, &rollout_cfg, &mut rollout_state, Some(&behavior))?;
        unstable.push(!is_ms_stabilizing(&system, &info.gain).unwrap_or(false));
    }
    Ok(unstable)
}

/// Sweeps the confidence parameter and reports the percentage of unstable
/// extracted gains per iteration.
pub fn instability_experiment(cfg: &InstabilityConfig) -> Result<Vec<InstabilityRecord>> {
    if cfg.repeats == 0 || cfg.iterations == 0 || cfg.betas.is_empty() {
        return Err(BenchError::InvalidExperiment(
            "instability sweep needs repeats, iterations, and betas".into(),
        ));
    }
    let mut records = Vec::new();
    for (beta_index, &beta0) in cfg.betas.iter().enumerate() {
        let flags: Vec<Result<Vec<bool>>> = (0..cfg.repeats)
            .into_par_iter()
            .map(|repeat| instability_repeat(cfg, beta_index, beta0, repeat))
            .collect();
        let mut unstable_counts = vec![0usize; cfg.iterations];
        for repeat_flags in flags {
            for (i, flag) in repeat_flags?.into_iter().enumerate() {
                if flag {
                    unstable_counts[i] += 1;
                }
            }
        }
        for (i, count) in unstable_counts.into_iter().enumerate() {
            records.push(InstabilityRecord {
                beta0,
                iteration: i + 1,
                percent_unstable: 100.0 * count as f64 / cfg.repeats as f64,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Scale};

    fn tiny_pi_config() -> ExperimentConfig {
        let mut cfg = preset("pi-off-policy", Scale::Desk).unwrap();
        cfg.repeats = 2;
        cfg.iterations = 3;
        cfg.rollout.trajectories = 5;
        cfg.rollout.horizon = 10;
        cfg
    }

    #[test]
    fn initial_gain_row_only_when_no_iterations() {
        let mut cfg = tiny_pi_config();
        cfg.repeats = 1;
        cfg.iterations = 0;
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].iteration, 0);
        assert_eq!(records[0].samples, 0);
        // The initial guess extracts the stabilizing reference gain.
        assert!(records[0].stable);
        assert!(records[0].suboptimality.is_finite());
    }

    #[test]
    fn records_are_deterministic_and_ordered() {
        let cfg = tiny_pi_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), (cfg.iterations + 1) * cfg.repeats);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.repeat, rb.repeat);
            assert_eq!(ra.iteration, rb.iteration);
            assert_eq!(ra.suboptimality.to_bits(), rb.suboptimality.to_bits());
            assert_eq!(ra.gain_error.to_bits(), rb.gain_error.to_bits());
        }
        // Canonical ordering: repeat-major, iteration-minor.
        let keys: Vec<_> = a.iter().map(|r| (r.repeat, r.iteration)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn si_learner_runs_and_improves() {
        let mut cfg = preset("si-off-policy", Scale::Desk).unwrap();
        cfg.repeats = 2;
        cfg.iterations = 10;
        cfg.rollout.trajectories = 10;
        cfg.rollout.horizon = 50;
        let records = run_experiment(&cfg).unwrap();
        let last: Vec<&MetricsRecord> = records
            .iter()
            .filter(|r| r.iteration == cfg.iterations)
            .collect();
        assert!(last.iter().all(|r| r.stable));
        assert!(last.iter().all(|r| r.suboptimality < 0.05));
    }

    #[test]
    fn pg_learner_descends() {
        let mut cfg = preset("pg", Scale::Desk).unwrap();
        cfg.repeats = 2;
        cfg.iterations = 30;
        let records = run_experiment(&cfg).unwrap();
        let first: f64 = records
            .iter()
            .filter(|r| r.iteration == 0)
            .map(|r| r.suboptimality)
            .sum::<f64>()
            / cfg.repeats as f64;
        let last: f64 = records
            .iter()
            .filter(|r| r.iteration == cfg.iterations)
            .map(|r| r.suboptimality)
            .sum::<f64>()
            / cfg.repeats as f64;
        assert!(
            last < first,
            "pg did not descend: start {first}, end {last}"
        );
    }

    #[test]
    fn instability_percentages_have_expected_shape() {
        let cfg = InstabilityConfig {
            seed: 11,
            repeats: 1,
            iterations: 5,
            betas: vec![0.1, 100.0],
            trajectories: 5,
            horizon: 10,
        };
        let records = instability_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 10);
        // Single repeat: percentages are all-or-nothing.
        assert!(records
            .iter()
            .all(|r| r.percent_unstable == 0.0 || r.percent_unstable == 100.0));
    }
}
