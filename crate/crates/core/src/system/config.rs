//! Structured text schema for system definitions.
//!
//! Mode matrices are nested arrays (rows of `a` and `b`), the noise model is
//! selected by `kind`. Example:
//!
//! ```toml
//! [[modes]]
//! a = [[0.43, 0.71], [-1.13, 0.43]]
//! b = [[0.36], [0.71]]
//!
//! [[modes]]
//! a = [[0.57, -0.01], [1.13, -0.01]]
//! b = [[0.0], [0.0]]
//!
//! [[modes]]
//! a = [[0.0, 0.0], [0.0, 0.0]]
//! b = [[0.36], [0.71]]
//!
//! [noise]
//! kind = "constant-plus-ellipsoid"
//! v_moment_diag = [0.2, 0.5]
//! ```
//!
//! Alternative noise kinds:
//!
//! ```toml
//! [noise]
//! kind = "gaussian"
//! mean = [1.0, 0.0]
//! cov = [[0.1, 0.0], [0.0, 0.2]]
//! ```
//!
//! ```toml
//! [noise]
//! kind = "table"
//! entries = [{ probability = 0.5, w = [1.0, 1.0] }, { probability = 0.5, w = [1.0, -1.0] }]
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sym::SymMat;

use super::{MsSystem, NoiseSpec};

/// Serializable description of an [`MsSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub modes: Vec<ModeConfig>,
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseConfig {
    ConstantPlusEllipsoid {
        v_moment_diag: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Table {
        entries: Vec<TableEntry>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub probability: f64,
    pub w: Vec<f64>,
}

fn matrix_from_rows<T: Scalar>(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<T>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidConfig(format!("{context}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidConfig(format!("{context}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| {
        nalgebra::convert(rows[i][j])
    }))
}

fn vector<T: Scalar>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| nalgebra::convert(x)))
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Instantiates the system at the requested precision.
    pub fn build<T: Scalar>(&self) -> Result<MsSystem<T>> {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                Ok((
                    matrix_from_rows::<T>(&m.a, "mode matrix a")?,
                    matrix_from_rows::<T>(&m.b, "mode matrix b")?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = match &self.noise {
            NoiseConfig::ConstantPlusEllipsoid { v_moment_diag } => {
                NoiseSpec::ConstantPlusEllipsoid {
                    v_moment_diag: vector(v_moment_diag),
                }
            }
            NoiseConfig::Gaussian { mean, cov } => NoiseSpec::Gaussian {
                mean: vector(mean),
                cov: SymMat::new(matrix_from_rows::<T>(cov, "noise covariance")?)?,
            },
            NoiseConfig::Table { entries } => NoiseSpec::Table {
                entries: entries
                    .iter()
                    .map(|e| (nalgebra::convert(e.probability), vector(&e.w)))
                    .collect(),
            },
        };
        MsSystem::new(modes, noise)
    }
}
