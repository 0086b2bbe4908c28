//! Wireless physical neural networks.
//!
//! Transceivers, amplify-and-forward relays, backscatter tags and
//! reconfigurable surfaces act as the layers of a neural network, with
//! power-amplifier saturation as the activation. The crate simulates such
//! networks, trains them physics-aware (through a differentiable digital
//! twin) or in situ (zeroth-order SPSA), emulates pretrained digital weights
//! over the air, and analyses how noise accumulates with depth.
//!
//! Signals are `d × B` complex matrices with one sample per column.

pub mod activation;
pub mod channel;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod noisemodel;
pub mod phylayers;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
