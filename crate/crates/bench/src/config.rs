//! Experiment configuration: TOML schema, validation, and named presets.
//!
//! A config file looks like:
//!
//! ```toml
//! id = "pi-off-policy-desk"
//! seed = 94323
//! repeats = 10
//! iterations = 200
//!
//! [system]                 # optional, defaults to the satellite benchmark
//! kind = "satellite"
//!
//! [cost]                   # optional, defaults to identity weights
//! q = [[1.0, 0.0], [0.0, 1.0]]
//! r = [[1.0]]
//!
//! [rollout]
//! trajectories = 30        # M
//! horizon = 100            # T
//! gain_radius = 0.0        # r_U
//! input_noise_radius = 0.1 # r_nu
//! init_state_radius = 1.0  # r_x
//! mode = "reset"           # or "continuous"
//!
//! [behavior]
//! gain = [[0.5, -0.75]]    # fixed data-generation gain and reference start
//!
//! [learner]
//! kind = "pi"              # "pi" | "si" | "pg"
//! beta0 = 2000.0
//! theta0 = [10.0, 0.0, -2.8284, 4.0, 4.2426, 4.0]
//! on_policy = false
//! ```
//!
//! Learner sections for the other kinds:
//!
//! ```toml
//! [learner]
//! kind = "si"
//! prior_variance = 1e6
//! ```
//!
//! ```toml
//! [learner]
//! kind = "pg"
//! step_size = 0.0075
//! scaling = "covariance-product"   # or "covariance-inverse"
//! ```
//!
//! Custom systems replace the `[system]` table with
//! `kind = "custom"` plus the `modes`/`noise` schema of
//! `mslqr::system::config`.

use mslqr::rollout::RolloutMode;
use mslqr::system::config::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    pub repeats: usize,
    pub iterations: usize,
    #[serde(default)]
    pub system: SystemSelector,
    #[serde(default)]
    pub cost: Option<CostSection>,
    pub rollout: RolloutSection,
    pub behavior: BehaviorSection,
    pub learner: LearnerConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSelector {
    #[default]
    Satellite,
    Custom(SystemConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    pub trajectories: usize,
    pub horizon: usize,
    #[serde(default)]
    pub gain_radius: f64,
    #[serde(default)]
    pub input_noise_radius: f64,
    #[serde(default = "default_init_radius")]
    pub init_state_radius: f64,
    #[serde(default = "default_mode")]
    pub mode: RolloutMode,
}

fn default_init_radius() -> f64 {
    1.0
}

fn default_mode() -> RolloutMode {
    RolloutMode::Reset
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSection {
    pub gain: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerConfig {
    Pi {
        beta0: f64,
        theta0: Vec<f64>,
        #[serde(default)]
        on_policy: bool,
    },
    Si {
        #[serde(default = "default_prior_variance")]
        prior_variance: f64,
    },
    Pg {
        step_size: f64,
        #[serde(default)]
        scaling: PgScalingConfig,
    },
}

fn default_prior_variance() -> f64 {
    mslqr::learn::si::DEFAULT_PRIOR_VARIANCE
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PgScalingConfig {
    /// Right multiplication by the moment aggregate, as the update rule is
    /// usually written for this scheme.
    #[default]
    CovarianceProduct,
    /// Right multiplication by its inverse, the conventional natural
    /// gradient. Kept selectable; neither variant is canonical here.
    CovarianceInverse,
}

impl From<PgScalingConfig> for mslqr::learn::PgScaling {
    fn from(value: PgScalingConfig) -> Self {
        match value {
            PgScalingConfig::CovarianceProduct => mslqr::learn::PgScaling::CovarianceProduct,
            PgScalingConfig::CovarianceInverse => mslqr::learn::PgScaling::CovarianceInverse,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(BenchError::ConfigParse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(BenchError::InvalidExperiment("repeats must be >= 1".into()));
        }
        if self.id.is_empty() {
            return Err(BenchError::InvalidExperiment("id must be non-empty".into()));
        }
        if self.behavior.gain.is_empty() || self.behavior.gain[0].is_empty() {
            return Err(BenchError::InvalidExperiment(
                "behavior gain must be non-empty".into(),
            ));
        }
        if let LearnerConfig::Pi { beta0, theta0, .. } = &self.learner {
            if *beta0 <= 0.0 {
                return Err(BenchError::InvalidExperiment("beta0 must be positive".into()));
            }
            if mslqr::sym::sd_inverse(theta0.len()).is_none() {
                return Err(BenchError::InvalidExperiment(
                    "theta0 length must be a triangular number".into(),
                ));
            }
        }
        if let LearnerConfig::Pg { step_size, .. } = &self.learner {
            if *step_size <= 0.0 {
                return Err(BenchError::InvalidExperiment(
                    "pg step size must be positive".into(),
                ));
            }
            if self.rollout.gain_radius <= 0.0 {
                return Err(BenchError::InvalidExperiment(
                    "pg needs a positive rollout gain_radius".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn learner_name(&self) -> &'static str {
        match self.learner {
            LearnerConfig::Pi { .. } => "pi",
            LearnerConfig::Si { .. } => "si",
            LearnerConfig::Pg { .. } => "pg",
        }
    }
}

/// Run size: desk scale keeps runs CI-sized, paper scale retains the full
/// iteration and repeat counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

fn base_off_policy_rollout() -> RolloutSection {
    RolloutSection {
        trajectories: 30,
        horizon: 100,
        gain_radius: 0.0,
        input_noise_radius: 0.1,
        init_state_radius: 1.0,
        mode: RolloutMode::Reset,
    }
}

fn satellite_behavior() -> BehaviorSection {
    BehaviorSection {
        gain: vec![vec![0.5, -0.75]],
    }
}

/// Named experiment presets at the requested scale.
pub fn preset(name: &str, scale: Scale) -> Option<ExperimentConfig> {
    let desk = scale == Scale::Desk;
    let (repeats, long_repeats) = if desk { (10, 10) } else { (25, 25) };
    let cfg = match name {
        "pi-off-policy" => ExperimentConfig {
            id: format!("pi-off-policy-{}", scale_tag(scale)),
            seed: 94323,
            repeats,
            iterations: if desk { 200 } else { 5000 },
            system: SystemSelector::Satellite,
            cost: None,
            rollout: base_off_policy_rollout(),
            behavior: satellite_behavior(),
            learner: LearnerConfig::Pi {
                beta0: 2000.0,
                theta0: crate::satellite::initial_theta(),
                on_policy: false,
            },
        },
        "si-off-policy" => ExperimentConfig {
            id: format!("si-off-policy-{}", scale_tag(scale)),
            seed: 94323,
            repeats,
            iterations: if desk { 200 } else { 5000 },
            system: SystemSelector::Satellite,
            cost: None,
            rollout: base_off_policy_rollout(),
            behavior: satellite_behavior(),
            learner: LearnerConfig::Si {
                prior_variance: default_prior_variance(),
            },
        },
        "pi-on-policy" => ExperimentConfig {
            id: format!("pi-on-policy-{}", scale_tag(scale)),
            seed: 52711,
            repeats: long_repeats,
            iterations: if desk { 300 } else { 1000 },
            system: SystemSelector::Satellite,
            cost: None,
            rollout: RolloutSection {
                trajectories: 1,
                horizon: 100,
                gain_radius: 0.0,
                input_noise_radius: 0.1,
                init_state_radius: 1.0,
                mode: RolloutMode::Continuous,
            },
            behavior: satellite_behavior(),
            learner: LearnerConfig::Pi {
                beta0: 100.0,
                theta0: crate::satellite::initial_theta(),
                on_policy: true,
            },
        },
        "pg" | "pg-10x" => {
            let base_m = if desk { 30 } else { 3000 };
            let m = if name == "pg-10x" { base_m * 10 } else { base_m };
            ExperimentConfig {
                id: format!("{name}-{}", scale_tag(scale)),
                seed: 77001,
                repeats,
                iterations: if desk { 120 } else { 250 },
                system: SystemSelector::Satellite,
                cost: None,
                rollout: RolloutSection {
                    trajectories: m,
                    horizon: 100,
                    gain_radius: 0.15,
                    input_noise_radius: 0.0,
                    init_state_radius: 1.0,
                    mode: RolloutMode::Reset,
                },
                behavior: satellite_behavior(),
                learner: LearnerConfig::Pg {
                    step_size: 7.5e-3,
                    scaling: PgScalingConfig::default(),
                },
            }
        }
        _ => return None,
    };
    Some(cfg)
}

pub fn preset_names() -> &'static [&'static str] {
    &["pi-off-policy", "si-off-policy", "pi-on-policy", "pg", "pg-10x"]
}

fn scale_tag(scale: Scale) -> &'static str {
    match scale {
        Scale::Desk => "desk",
        Scale::Paper => "paper",
    }
}

/// Settings of the instability sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityConfig {
    pub seed: u64,
    pub repeats: usize,
    pub iterations: usize,
    pub betas: Vec<f64>,
    pub trajectories: usize,
    pub horizon: usize,
}

impl InstabilityConfig {
    pub fn at_scale(scale: Scale) -> Self {
        Self {
            seed: 61409,
            repeats: if scale == Scale::Desk { 200 } else { 1000 },
            iterations: 100,
            betas: vec![0.1, 1.0, 10.0, 100.0],
            trajectories: 5,
            horizon: 10,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            for scale in [Scale::Desk, Scale::Paper] {
                let cfg = preset(name, scale).unwrap();
                cfg.validate().unwrap();
                // Serialization round trip through the schema.
                let text = cfg.to_toml_string();
                let back = ExperimentConfig::from_toml_str(&text).unwrap();
                assert_eq!(back.id, cfg.id);
                assert_eq!(back.iterations, cfg.iterations);
            }
        }
        assert!(preset("no-such", Scale::Desk).is_none());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"
            id = "x"
            seed = 1
            repeats = 1
            iterations = 1
            bogus = true

            [rollout]
            trajectories = 1
            horizon = 1

            [behavior]
            gain = [[0.0]]

            [learner]
            kind = "si"
        "#;
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn rejects_bad_theta_length() {
        let text = r#"
            id = "x"
            seed = 1
            repeats = 1
            iterations = 1

            [rollout]
            trajectories = 1
            horizon = 1

            [behavior]
            gain = [[0.0]]

            [learner]
            kind = "pi"
            beta0 = 10.0
            theta0 = [1.0, 2.0]
        "#;
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn custom_system_section_parses() {
        let text = r#"
            id = "custom"
            seed = 3
            repeats = 1
            iterations = 1

            [system]
            kind = "custom"

            [[system.modes]]
            a = [[0.5]]
            b = [[1.0]]

            [system.noise]
            kind = "table"
            entries = [{ probability = 1.0, w = [1.0] }]

            [rollout]
            trajectories = 1
            horizon = 5

            [behavior]
            gain = [[0.0]]

            [learner]
            kind = "si"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        match cfg.system {
            SystemSelector::Custom(ref sc) => assert_eq!(sc.modes.len(), 1),
            _ => panic!("expected custom system"),
        }
    }
}
