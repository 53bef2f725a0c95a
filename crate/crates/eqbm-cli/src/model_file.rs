//! Model documents: Pauli terms tagged with their role plus initial coefficients.

use std::path::Path;
use std::sync::Arc;

use eqbm::gradients::GenModTarget;
use eqbm::pauli::{Model, ParamHamiltonian, PauliString};
use eqbm::state::{resolve, DenseModel, EqbmState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    G,
    H,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEntry {
    pub pauli: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_qubits: usize,
    pub terms: Vec<TermEntry>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Written by gen-model; ignored on read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn from_model(m: &Model, seed: Option<u64>) -> Self {
        let entry = |p: &PauliString, role| TermEntry { pauli: p.to_string(), role };
        let terms = m.g.terms().iter().map(|p| entry(p, Role::G)).chain(m.h.terms().iter().map(|p| entry(p, Role::H))).collect();
        ModelFile { n_qubits: m.n_qubits(), terms, theta: m.theta.clone(), phi: m.phi.clone(), seed, provenance: None }
    }

    pub fn to_model(&self) -> CliResult<Model> {
        let mut g = Vec::new();
        let mut h = Vec::new();
        for t in &self.terms {
            let p: PauliString = t.pauli.parse()?;
            if p.n_qubits() != self.n_qubits {
                return Err(CliError::usage(format!("term {} does not act on {} qubits", t.pauli, self.n_qubits)));
            }
            match t.role {
                Role::G => g.push(p),
                Role::H => h.push(p),
            }
        }
        Ok(Model::new(
            ParamHamiltonian::new(self.n_qubits, g)?,
            ParamHamiltonian::new(self.n_qubits, h)?,
            self.theta.clone(),
            self.phi.clone(),
        )?)
    }

    /// SHA-256 of the canonical serialization, without provenance.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.provenance = None;
        let bytes = serde_json::to_vec(&c).expect("model documents serialize");
        format!("{:x}", Sha256::digest(bytes))
    }
}

pub struct Loaded {
    pub file: ModelFile,
    pub dense: Arc<DenseModel>,
}

impl Loaded {
    pub fn state(&self, theta: Option<&[f64]>, phi: Option<&[f64]>) -> CliResult<EqbmState> {
        let m = &self.dense.model;
        Ok(resolve(&self.dense, theta.unwrap_or(&m.theta), phi.unwrap_or(&m.phi))?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> CliResult<Loaded> {
    let file: ModelFile = read_json(path)?;
    let dense = DenseModel::new(file.to_model()?);
    Ok(Loaded { file, dense })
}

/// Target η = ω of the model in `path` at its stored coefficients.
pub fn load_target(path: &Path, dim: usize) -> CliResult<GenModTarget> {
    let t = load_model(path)?;
    if t.dense.dim() != dim {
        return Err(CliError::usage("target model acts on a different number of qubits"));
    }
    Ok(GenModTarget::new(t.state(None, None)?.omega().clone())?)
}
