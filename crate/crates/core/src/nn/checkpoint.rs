use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, NnError, Result};
use crate::engine::Tensor;

pub const CHECKPOINT_VERSION: &str = "apalu-lab/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Single-document model snapshot. Floats are written with shortest
/// round-trip formatting, so save/load is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub spec: ModelSpec,
    pub params: Vec<ParamRecord>,
}

fn ckpt_err(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

impl Model {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            spec: self.spec.clone(),
            params: self
                .params
                .entries()
                .iter()
                .map(|e| ParamRecord {
                    name: e.name.clone(),
                    shape: e.value.shape().to_vec(),
                    data: e.value.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ckpt_err(format!(
                "unsupported version `{}` (expected `{CHECKPOINT_VERSION}`)",
                ckpt.version
            )));
        }
        // Layout only; every value is overwritten below.
        let mut model = Model::new(ckpt.spec.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        if model.params.len() != ckpt.params.len() {
            return Err(ckpt_err(format!(
                "spec implies {} parameters, checkpoint has {}",
                model.params.len(),
                ckpt.params.len()
            )));
        }
        for (entry, rec) in model.params.entries.iter_mut().zip(&ckpt.params) {
            if entry.name != rec.name || entry.value.shape() != rec.shape.as_slice() {
                return Err(ckpt_err(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    rec.name,
                    rec.shape,
                    entry.name,
                    entry.value.shape()
                )));
            }
            entry.value = Tensor::new(rec.shape.clone(), rec.data.clone())
                .map_err(|e| ckpt_err(e.to_string()))?;
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s).map_err(|e| ckpt_err(e.to_string()))?;
        Self::from_checkpoint(&ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| ckpt_err(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| ckpt_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}
