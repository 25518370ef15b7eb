//! JSON model files.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "channels": [[[1, 0], [0, -1]]],
//!   "hamiltonian": [[0, 0], [0, 0]],
//!   "scattering": null,
//!   "classical": {
//!     "jumps": [{"matrix": [[1, 0], [0, [0.5, 0.866]]], "rate": 1.0, "phase": 0.0}],
//!     "diffusions": [{"matrix": [[1, 0], [0, -1]], "theta": 0.0}],
//!     "hamiltonian": [[0, 0], [0, 0]]
//!   }
//! }
//! ```
//!
//! Complex entries are `[re, im]` pairs; a bare number is read as a real
//! entry. Matrices are row-major. `dim` is checked against every matrix so
//! ragged input fails early. `scattering` is the `(dN)×(dN)` block matrix and
//! defaults to the identity; `hamiltonian` defaults to zero.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dilation::{ClassicalModel, Diffusion, Jump};
use crate::linalg::{identity, Operator, Tolerance, C64};
use crate::model::{EuclideanTransform, SlhTriple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexJson {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexJson> for C64 {
    fn from(z: ComplexJson) -> C64 {
        match z {
            ComplexJson::Pair([re, im]) => C64::new(re, im),
            ComplexJson::Real(re) => C64::new(re, 0.0),
        }
    }
}

impl From<C64> for ComplexJson {
    fn from(z: C64) -> Self {
        ComplexJson::Pair([z.re, z.im])
    }
}

pub type MatrixJson = Vec<Vec<ComplexJson>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpJson {
    pub matrix: MatrixJson,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionJson {
    pub matrix: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalJson {
    #[serde(default)]
    pub jumps: Vec<JumpJson>,
    #[serde(default)]
    pub diffusions: Vec<DiffusionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    #[serde(default)]
    pub channels: Vec<MatrixJson>,
    #[serde(default)]
    pub hamiltonian: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalJson>,
}

/// `{"T": matrix, "beta": [complex], "e": real}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformFile {
    #[serde(rename = "T")]
    pub t: MatrixJson,
    pub beta: Vec<ComplexJson>,
    #[serde(default)]
    pub e: f64,
}

/// A parsed model: the triple and the optional classical section.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub triple: SlhTriple,
    pub classical: Option<ClassicalModel>,
}

pub fn matrix_to_json(a: &Operator) -> MatrixJson {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].into()).collect())
        .collect()
}

pub fn real_matrix_to_json(a: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// Row-major nested arrays to an `n×n` operator.
pub fn matrix_from_json(rows: &MatrixJson, n: usize, what: &str) -> Result<Operator, CliError> {
    if rows.len() != n {
        return Err(CliError::parse(format!(
            "{what}: expected {n} rows, found {}",
            rows.len()
        )));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != n) {
        return Err(CliError::parse(format!(
            "{what}: row {i} has {} entries, expected {n}",
            rows[i].len()
        )));
    }
    Ok(Operator::from_fn(n, n, |i, j| rows[i][j].into()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        parse_json(&read(path)?, path)
    }

    /// Shape checks, then construction of the triple and the classical model.
    pub fn to_model(&self, tol: Tolerance) -> Result<Model, CliError> {
        let n = self.dim;
        if n == 0 {
            return Err(CliError::parse("dim must be positive"));
        }
        let couplings = self
            .channels
            .iter()
            .enumerate()
            .map(|(k, m)| matrix_from_json(m, n, &format!("channel {k}")))
            .collect::<Result<Vec<_>, _>>()?;
        let hamiltonian = match &self.hamiltonian {
            Some(h) => matrix_from_json(h, n, "hamiltonian")?,
            None => Operator::zeros(n, n),
        };
        let d = couplings.len();
        let scattering = match &self.scattering {
            Some(s) => matrix_from_json(s, d * n, "scattering")?,
            None => identity(d * n),
        };
        let triple = SlhTriple::new(scattering, couplings, hamiltonian)?;
        let classical = self
            .classical
            .as_ref()
            .map(|c| c.to_model(n, tol))
            .transpose()?;
        Ok(Model { triple, classical })
    }

    pub fn from_model(model: &Model) -> Self {
        let g = &model.triple;
        let scattering =
            (g.scattering != identity(g.scattering.nrows())).then(|| matrix_to_json(&g.scattering));
        ModelFile {
            dim: g.dim,
            channels: g.couplings.iter().map(matrix_to_json).collect(),
            hamiltonian: Some(matrix_to_json(&g.hamiltonian)),
            scattering,
            classical: model.classical.as_ref().map(ClassicalJson::from_model),
        }
    }
}

impl ClassicalJson {
    fn to_model(&self, n: usize, tol: Tolerance) -> Result<ClassicalModel, CliError> {
        let jumps = self
            .jumps
            .iter()
            .enumerate()
            .map(|(j, jump)| {
                Ok(Jump {
                    scattering: matrix_from_json(&jump.matrix, n, &format!("classical jump {j}"))?,
                    rate: jump.rate,
                    phase: jump.phase,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let diffusions = self
            .diffusions
            .iter()
            .enumerate()
            .map(|(k, diff)| {
                Ok(Diffusion {
                    generator: matrix_from_json(
                        &diff.matrix,
                        n,
                        &format!("classical diffusion {k}"),
                    )?,
                    theta: diff.theta,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let hamiltonian = match &self.hamiltonian {
            Some(h) => matrix_from_json(h, n, "classical hamiltonian")?,
            None => Operator::zeros(n, n),
        };
        Ok(ClassicalModel::new(jumps, diffusions, hamiltonian, tol)?)
    }

    pub fn from_model(m: &ClassicalModel) -> Self {
        ClassicalJson {
            jumps: m
                .jumps
                .iter()
                .map(|j| JumpJson {
                    matrix: matrix_to_json(&j.scattering),
                    rate: j.rate,
                    phase: j.phase,
                })
                .collect(),
            diffusions: m
                .diffusions
                .iter()
                .map(|d| DiffusionJson {
                    matrix: matrix_to_json(&d.generator),
                    theta: d.theta,
                })
                .collect(),
            hamiltonian: Some(matrix_to_json(&m.hamiltonian)),
        }
    }
}

impl TransformFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        parse_json(&read(path)?, path)
    }

    pub fn to_transform(&self) -> Result<EuclideanTransform, CliError> {
        let d = self.beta.len();
        let t = matrix_from_json(&self.t, d, "T")?;
        let beta = DVector::from_iterator(d, self.beta.iter().map(|&b| b.into()));
        Ok(EuclideanTransform::new(t, beta, self.e)?)
    }
}

/// A state file holds a bare row-major matrix.
pub fn load_state(path: &Path, n: usize) -> Result<Operator, CliError> {
    let rows: MatrixJson = parse_json(&read(path)?, path)?;
    matrix_from_json(&rows, n, "state")
}

pub fn load_model(path: &Path, tol: Tolerance) -> Result<Model, CliError> {
    ModelFile::load(path)?.to_model(tol)
}
