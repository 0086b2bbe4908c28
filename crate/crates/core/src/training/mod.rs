//! Training of wireless networks: gradient training of a digital twin,
//! in-situ training by simultaneous perturbation, and training-free
//! emulation of pretrained digital weights.

mod checkpoint;
mod emulate;
mod pat;
mod reference;
mod spsa;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, Checkpoint, TensorRecord, CHECKPOINT_VERSION};
pub use emulate::{emulate_fc, emulate_ofdm_kernel, EmulationResult, OfdmEmulation, UNREACHABLE_GAIN};
pub(crate) use pat::argmax_hits;
pub use pat::{evaluate, resample_channels, train_pat, train_pat_observed, ChannelResample, EpochRecord, Evaluation, History, PatConfig, StepInfo};
pub use reference::{digital_reference, fc_stack_model, image_bands, train_cnn, xor_relay_model, CnnConfig, CnnModel, DigitalArch, DigitalReference, BANDS, BAND_LEN};
pub use spsa::{read_params, spsa_gradient, spsa_minimize, train_ist_spsa, write_params, SpsaConfig, SpsaTrace};

use crate::data::ImageDataset;
use crate::diffcore::Matrix;

/// A labelled set that can hand out batches as `dim × B` matrices.
pub trait Batches {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>);
}

impl Batches for ImageDataset {
    fn len(&self) -> usize {
        ImageDataset::len(self)
    }

    fn batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        ImageDataset::batch(self, idx)
    }
}

/// In-memory samples, one per column of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub x: Matrix,
    pub labels: Vec<usize>,
}

impl Samples {
    /// The four XOR points on `{0, 1}²`.
    pub fn xor() -> Self {
        let x = Matrix::from_vec(2, 4, vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]).expect("static shape");
        Self { x, labels: vec![0, 1, 1, 0] }
    }
}

impl Batches for Samples {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        (self.x.select_cols(idx), idx.iter().map(|&i| self.labels[i]).collect())
    }
}
