//! Benchmark harness for the `mslqr` learners: the satellite reference
//! system, experiment configuration and presets, seeded repeated runs with
//! per-iteration metrics, rate-slope analysis, and a structural invariant
//! suite. The `mslqr-bench` binary exposes all of it on the command line.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod satellite;
pub mod slope;
pub mod validate;

pub use config::{preset, preset_names, ExperimentConfig, InstabilityConfig, Scale};
pub use error::{BenchError, Result};
pub use experiment::{instability_experiment, run_experiment};
pub use metrics::{InstabilityRecord, MetricsRecord};
pub use slope::{rate_slope, Metric};
