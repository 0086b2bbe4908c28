//! Checkpoints are JSON documents:
//!
//! ```text
//! { "version": 1,
//!   "config_hash": "<sha-256 hex of the config text>",
//!   "tensors": [ { "name": "layer0.transceiver.precoder.re",
//!                  "rows": 32, "cols": 784, "data": [row-major f64] }, ... ] }
//! ```
//!
//! Tensors appear in the model's `named_params` order. Floats are written
//! with round-trip precision, so a save/load cycle is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::phylayers::WpnnModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub tensors: Vec<TensorRecord>,
}

/// Hex SHA-256 of a config document.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn from_named(config_hash: &str, named: &[(String, &Matrix)]) -> Self {
        let tensors = named
            .iter()
            .map(|(name, m)| TensorRecord { name: name.clone(), rows: m.rows(), cols: m.cols(), data: m.as_slice().to_vec() })
            .collect();
        Self { version: CHECKPOINT_VERSION, config_hash: config_hash.to_string(), tensors }
    }

    pub fn of_model(model: &WpnnModel, config_hash: &str) -> Self {
        Self::from_named(config_hash, &model.named_params())
    }

    /// Copies the tensors into the model; names and shapes must match.
    pub fn apply_to(&self, model: &mut WpnnModel) -> Result<()> {
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!("{} tensors stored, model has {}", self.tensors.len(), names.len())));
        }
        for (name, rec) in names.iter().zip(&self.tensors) {
            if *name != rec.name {
                return Err(Error::Checkpoint(format!("expected tensor {name}, found {}", rec.name)));
            }
        }
        for (m, rec) in model.params_mut().into_iter().zip(&self.tensors) {
            if m.shape() != (rec.rows, rec.cols) || rec.data.len() != rec.rows * rec.cols {
                return Err(Error::Checkpoint(format!("{}: shape {:?} does not fit {:?}", rec.name, (rec.rows, rec.cols), m.shape())));
            }
            m.as_mut_slice().copy_from_slice(&rec.data);
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(ckpt).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", ckpt.version)));
    }
    Ok(ckpt)
}
