//! Named, reproducible random streams.
//!
//! Each purpose (channel draws, noise, initialization, SPSA perturbations)
//! gets its own ChaCha stream keyed by `(seed, purpose, index)`, so changing
//! how many draws one component makes never shifts another component's
//! randomness.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::diffcore::{CTensor, Matrix};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, purpose: &str) -> Stream {
    substream(seed, purpose, 0)
}

pub fn substream(seed: u64, purpose: &str, index: u64) -> Stream {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circularly-symmetric complex Gaussian with `E|z|² = var`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    Complex64::new(s * normal(rng), s * normal(rng))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * normal(rng))
}

/// Matrix of i.i.d. `CN(0, var)` entries.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CTensor {
    CTensor::from_fn(rows, cols, |_, _| complex_gaussian(rng, var))
}
