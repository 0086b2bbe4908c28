use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::FwdCtx;
use crate::channel::NoiseSpec;
use crate::diffcore::{cmatmul, CTensor, CVar, Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Convolution over OFDM subcarriers.
///
/// Group `g` transmits the input with per-subcarrier weights
/// `per_sub_weight[:, g]` through the shared channel gains, so its output is
/// the circular convolution of the input with the kernel whose DFT is
/// `per_sub_weight[:, g] ⊙ channel_gain`. Groups model subarrays producing
/// separate output feature channels.
#[derive(Clone, Debug, PartialEq)]
pub struct OfdmConvLayer {
    pub n_sub: usize,
    /// `n_sub × groups`.
    pub per_sub_weight: CTensor,
    /// `n_sub × 1`.
    pub channel_gain: CTensor,
    pub noise: NoiseSpec,
    pub trainable: bool,
}

impl OfdmConvLayer {
    pub fn new(per_sub_weight: CTensor, channel_gain: CTensor) -> Result<Self> {
        let n_sub = channel_gain.rows();
        if n_sub == 0 || channel_gain.cols() != 1 || per_sub_weight.rows() != n_sub || per_sub_weight.cols() == 0 {
            return Err(Error::Shape(format!(
                "weights {:?} and channel gains {:?} disagree",
                per_sub_weight.shape(),
                channel_gain.shape()
            )));
        }
        Ok(Self { n_sub, per_sub_weight, channel_gain, noise: NoiseSpec::NONE, trainable: true })
    }

    pub fn groups(&self) -> usize {
        self.per_sub_weight.cols()
    }

    /// Frequency response of group `g`: `per_sub_weight[:, g] ⊙ channel_gain`.
    pub fn response(&self, g: usize) -> Vec<Complex64> {
        (0..self.n_sub).map(|k| self.per_sub_weight.get(k, g) * self.channel_gain.get(k, 0)).collect()
    }

    /// Stacked circulant matrices, `(n_sub·groups) × n_sub`.
    pub fn effective_weight(&self) -> Result<CTensor> {
        let n = self.n_sub;
        let f = dft_matrix(n);
        let finv = idft_matrix(n);
        let mut out = CTensor::zeros(n * self.groups(), n);
        for g in 0..self.groups() {
            let d = self.response(g);
            let df = CTensor::from_fn(n, n, |i, j| d[i] * f.get(i, j));
            let block = cmatmul(&finv, &df)?;
            for i in 0..n {
                for j in 0..n {
                    out.set(g * n + i, j, block.get(i, j));
                }
            }
        }
        Ok(out)
    }

    /// Tape form: `IDFT(diag(w ⊙ h) DFT x + n)` per group, stacked.
    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar) -> Result<CVar> {
        let n = self.n_sub;
        let groups = self.groups();
        if t.cshape(x).0 != n {
            return Err(Error::Shape(format!("OFDM layer expects {n} samples per symbol, got {}", t.cshape(x).0)));
        }
        let f = dft_matrix(n);
        let f_stack = CTensor::from_fn(n * groups, n, |i, j| f.get(i % n, j));
        let finv = idft_matrix(n);
        let finv_blk = CTensor::from_fn(n * groups, n * groups, |i, j| if i / n == j / n { finv.get(i % n, j % n) } else { Complex64::new(0.0, 0.0) });
        // weights stacked group-major into one column
        let w = ctx.bind_c(t, &self.per_sub_weight, self.trainable);
        let w_col = CVar { re: stack_columns(t, w.re)?, im: stack_columns(t, w.im)? };
        let h_stack = CTensor::from_fn(n * groups, 1, |i, _| self.channel_gain.get(i % n, 0));
        let hv = t.cconst(&h_stack);
        let resp = t.cmul(w_col, hv)?;
        let fx = {
            let fs = t.cconst(&f_stack);
            t.cmatmul(fs, x)?
        };
        let y_freq = t.cmul_col(fx, resp)?;
        let y_freq = ctx.add_noise(t, y_freq, &self.noise)?;
        let fi = t.cconst(&finv_blk);
        t.cmatmul(fi, y_freq)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        if self.trainable {
            vec![&mut self.per_sub_weight.re, &mut self.per_sub_weight.im]
        } else {
            Vec::new()
        }
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        if self.trainable {
            vec![("per_sub_weight.re".to_string(), &self.per_sub_weight.re), ("per_sub_weight.im".to_string(), &self.per_sub_weight.im)]
        } else {
            Vec::new()
        }
    }
}

/// `vec(W)`: an `n × g` node to an `(n·g) × 1` column, group-major, as
/// `Σ_g P_g W e_g` with fixed placement matrices so gradients flow through.
fn stack_columns(t: &mut Tape, w: Var) -> Result<Var> {
    let (n, g) = t.shape(w);
    let mut acc: Option<Var> = None;
    for gi in 0..g {
        let sel = t.constant(Matrix::from_fn(g, 1, |i, _| if i == gi { 1.0 } else { 0.0 }));
        let col = t.matmul(w, sel)?;
        let place = t.constant(Matrix::from_fn(n * g, n, |i, j| if i == gi * n + j { 1.0 } else { 0.0 }));
        let placed = t.matmul(place, col)?;
        acc = Some(match acc {
            Some(a) => t.add(a, placed)?,
            None => placed,
        });
    }
    acc.ok_or_else(|| Error::Shape("OFDM layer without groups".into()))
}

/// Unnormalized DFT matrix `F_kn = e^{-2πi kn/N}`.
pub fn dft_matrix(n: usize) -> CTensor {
    CTensor::from_fn(n, n, |k, j| Complex64::from_polar(1.0, -2.0 * PI * ((k * j) % n) as f64 / n as f64))
}

/// Inverse DFT matrix `F⁻¹ = Fᴴ / N`.
pub fn idft_matrix(n: usize) -> CTensor {
    CTensor::from_fn(n, n, |j, k| Complex64::from_polar(1.0 / n as f64, 2.0 * PI * ((k * j) % n) as f64 / n as f64))
}

/// Frequency-domain simulation of one OFDM symbol through every group:
/// FFT, per-subcarrier multiplication by `w ⊙ h`, inverse FFT. Returns
/// `n_sub × groups`.
pub fn ofdm_conv_forward(layer: &OfdmConvLayer, x_time: &[Complex64]) -> Result<CTensor> {
    let n = layer.n_sub;
    if x_time.len() != n {
        return Err(Error::Shape(format!("OFDM symbol of length {} on {n} subcarriers", x_time.len())));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spectrum = x_time.to_vec();
    fwd.process(&mut spectrum);
    let mut out = CTensor::zeros(n, layer.groups());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for g in 0..layer.groups() {
        let d = layer.response(g);
        for k in 0..n {
            buf[k] = spectrum[k] * d[k];
        }
        inv.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            out.set(k, g, z / n as f64);
        }
    }
    Ok(out)
}
