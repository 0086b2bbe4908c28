use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient for parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("non-finite loss at epoch {epoch}, step {step}; first non-finite signal after layer {layer}")]
    NonFiniteLoss { epoch: usize, step: usize, layer: usize },

    #[error("under-determined estimate: {pilots} pilots for {tx} transmit antennas")]
    UnderDetermined { pilots: usize, tx: usize },

    #[error("{path}: invalid {field}: {msg}")]
    Parse { path: PathBuf, field: &'static str, msg: String },

    #[error("dataset not found in {dir}: {msg}; fetch it with `scripts/fetch_fashion_mnist.sh {dir}` or set WPNN_DATA_DIR / --data-dir")]
    MissingData { dir: PathBuf, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("evaluator failed: {0}")]
    Evaluator(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
