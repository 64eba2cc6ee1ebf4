//! Rollout data generation: simulate perturbed-feedback trajectories and
//! emit transition-moment sample pairs for the learners.
//!
//! Each trajectory `j` of an iteration draws from its own counter-based RNG
//! substream keyed on `(seed, iteration, trajectory)`, so batches are
//! reproducible bit for bit and independent of execution order. Within a
//! trajectory the draw order is fixed: gain perturbation, then initial state
//! (unless carried), then per step input noise followed by the disturbance.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::sample_ball;
pub use crate::sampling::{sample_ball as ball_draw, sample_sphere_matrix};
use crate::scalar::{SampleScalar, Scalar};
use crate::sym::SymMat;
use crate::system::{MsSystem, Policy};

/// How trajectories are initialized at the start of each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RolloutMode {
    /// Fresh initial states drawn uniformly from the radius-`r_x` ball.
    Reset,
    /// Trajectories continue from the previous iteration's terminal states.
    Continuous,
}

/// Data-generation settings for one iteration of rollouts.
#[derive(Debug, Clone)]
pub struct RolloutConfig<T: Scalar> {
    /// Number of trajectories per iteration (`M`).
    pub trajectories: usize,
    /// Steps per trajectory (`T`); each step emits one sample.
    pub horizon: usize,
    /// Frobenius radius of the per-trajectory gain perturbation (`r_U`).
    pub gain_radius: T,
    /// Euclidean radius of the per-step additive input noise (`r_ν`).
    pub input_noise_radius: T,
    /// Euclidean radius of the initial-state ball (`r_x`).
    pub init_state_radius: T,
    pub mode: RolloutMode,
    pub seed: u64,
}

impl<T: Scalar> RolloutConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.trajectories == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "rollout needs at least one trajectory and one step".into(),
            ));
        }
        if self.gain_radius < T::zero()
            || self.input_noise_radius < T::zero()
            || self.init_state_radius < T::zero()
        {
            return Err(Error::InvalidConfig(
                "rollout radii must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One transition-moment pair `(Z, X⁺)` with its provenance.
///
/// The realized disturbance is deliberately not stored; the learners must
/// stay blind to it. The `(iteration, traj)` coordinates identify the RNG
/// substream, so a sample can be recomputed forensically.
#[derive(Debug, Clone)]
pub struct Sample<T: Scalar> {
    /// Rank-one augmented moment `z zᵀ` with `z = (x, u)`.
    pub z: SymMat<T>,
    /// Rank-one next-state moment `x⁺ x⁺ᵀ`.
    pub x_plus: SymMat<T>,
    pub iteration: u64,
    pub traj: usize,
    pub step: usize,
    /// The gain actually applied on this trajectory, `K + U`.
    pub applied_gain: Policy<T>,
}

/// Mutable cross-iteration state: the iteration counter keying the RNG
/// substreams and, in continuous mode, the carried terminal states.
#[derive(Debug, Clone, Default)]
pub struct RolloutState<T: Scalar> {
    iteration: u64,
    carried: Option<Vec<DVector<T>>>,
}

impl<T: Scalar> RolloutState<T> {
    pub fn new() -> Self {
        Self {
            iteration: 0,
            carried: None,
        }
    }

    /// Preloads the states trajectories continue from (continuous mode).
    pub fn with_initial_states(states: Vec<DVector<T>>) -> Self {
        Self {
            iteration: 0,
            carried: Some(states),
        }
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn carried_states(&self) -> Option<&[DVector<T>]> {
        self.carried.as_deref()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic substream for trajectory `traj` of iteration `iteration`.
pub(crate) fn substream(seed: u64, iteration: u64, traj: u64) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    state ^= iteration.wrapping_mul(0xa076_1d64_78bd_642f);
    let b = splitmix64(&mut state);
    state ^= traj.wrapping_mul(0xe703_7ed1_a0b4_28db);
    let c = splitmix64(&mut state);
    ChaCha8Rng::seed_from_u64(a ^ b.rotate_left(21) ^ c.rotate_left(42))
}

/// Simulates one trajectory and returns its samples plus the terminal state.
///
/// Exposed so callers can distribute trajectories across threads themselves;
/// the output only depends on `(cfg.seed, iteration, traj)` and the inputs.
pub fn simulate_trajectory<T: SampleScalar>(
    sys: &MsSystem<T>,
    cfg: &RolloutConfig<T>,
    pol: &Policy<T>,
    carried_x0: Option<&DVector<T>>,
    iteration: u64,
    traj: usize,
) -> Result<(Vec<Sample<T>>, DVector<T>)> {
    let (n_x, n_u) = (pol.state_dim(), pol.input_dim());
    let mut rng = substream(cfg.seed, iteration, traj as u64);

    let perturbation = sample_sphere_matrix(n_u, n_x, cfg.gain_radius, &mut rng);
    let applied_gain = Policy::new(pol.gain() + &perturbation)?;

    let mut x = match carried_x0 {
        Some(x0) => {
            if x0.len() != n_x {
                return Err(Error::DimensionMismatch {
                    context: "carried rollout state",
                    expected: n_x,
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        None => sample_ball(n_x, cfg.init_state_radius, &mut rng),
    };

    let mut samples = Vec::with_capacity(cfg.horizon);
    for step in 0..cfg.horizon {
        let nu = sample_ball(n_u, cfg.input_noise_radius, &mut rng);
        let u = applied_gain.apply(&x) + nu;
        let w = sys.sample_noise(&mut rng);
        let x_next = sys.step(&x, &u, &w)?;

        let mut z = DVector::zeros(n_x + n_u);
        z.rows_mut(0, n_x).copy_from(&x);
        z.rows_mut(n_x, n_u).copy_from(&u);
        samples.push(Sample {
            z: SymMat::outer(&z),
            x_plus: SymMat::outer(&x_next),
            iteration,
            traj,
            step,
            applied_gain: applied_gain.clone(),
        });
        x = x_next;
    }
    Ok((samples, x))
}

/// Runs one iteration of rollouts under `pol` and advances the state.
///
/// Returns `trajectories · horizon` samples in trajectory-major, step-minor
/// order. In continuous mode the trajectories resume from the carried
/// terminal states, falling back to fresh ball draws on the first call.
pub fn generate<T: SampleScalar>(
    sys: &MsSystem<T>,
    cfg: &RolloutConfig<T>,
    pol: &Policy<T>,
    state: &mut RolloutState<T>,
) -> Result<Vec<Sample<T>>> {
    cfg.validate()?;
    let iteration = state.iteration;
    let carried = match (cfg.mode, &state.carried) {
        (RolloutMode::Continuous, Some(states)) => {
            if states.len() != cfg.trajectories {
                return Err(Error::DimensionMismatch {
                    context: "carried rollout state count",
                    expected: cfg.trajectories,
                    got: states.len(),
                });
            }
            Some(states.clone())
        }
        _ => None,
    };

    let mut samples = Vec::with_capacity(cfg.trajectories * cfg.horizon);
    let mut terminals = Vec::with_capacity(cfg.trajectories);
    for traj in 0..cfg.trajectories {
        let x0 = carried.as_ref().map(|states| &states[traj]);
        let (mut traj_samples, terminal) = simulate_trajectory(sys, cfg, pol, x0, iteration, traj)?;
        samples.append(&mut traj_samples);
        terminals.push(terminal);
    }

    state.iteration += 1;
    if cfg.mode == RolloutMode::Continuous {
        state.carried = Some(terminals);
    }
    Ok(samples)
}

/// Dumps a sample batch as CSV with svec coordinates, for offline analysis.
pub fn write_samples_csv<T: Scalar, W: std::io::Write>(
    samples: &[Sample<T>],
    out: &mut W,
) -> std::io::Result<()> {
    if samples.is_empty() {
        writeln!(out, "iter,traj,step")?;
        return Ok(());
    }
    let sd_z = samples[0].z.svec().len();
    let sd_x = samples[0].x_plus.svec().len();
    write!(out, "iter,traj,step")?;
    for k in 0..sd_z {
        write!(out, ",z_{k}")?;
    }
    for k in 0..sd_x {
        write!(out, ",xplus_{k}")?;
    }
    writeln!(out)?;
    for s in samples {
        write!(out, "{},{},{}", s.iteration, s.traj, s.step)?;
        for v in s.z.svec().data().iter() {
            write!(out, ",{:.16e}", crate::scalar::to_f64(*v))?;
        }
        for v in s.x_plus.svec().data().iter() {
            write!(out, ",{:.16e}", crate::scalar::to_f64(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
