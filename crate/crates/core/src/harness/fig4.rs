//! Classification accuracy of a CNN whose second convolution runs over a
//! RIS-assisted MIMO-OFDM link, against the transmit power budget.
//!
//! Each kernel `(o, i)` is sent on its own OFDM symbol with per-subcarrier
//! weights `w[n] = α K̂[n] / h[n]`, where `h[n]` is the beamformed gain of
//! subcarrier `n` and `α` spends the whole budget `Σ|w|² = P_max · n_sub`.
//! The receiver divides by `α` and sums over input channels, so the noise
//! each output channel sees is `Σ_i 1/α²_{o,i}` times the per-subcarrier
//! noise power.

use std::time::Instant;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::config::ExperimentConfig;
use super::MetricsRecord;
use crate::channel::{frequency_response, sample_multitap};
use crate::data::{batch_iter, ImageDataset};
use crate::diffcore::{CTensor, Matrix, Tape};
use crate::error::{Error, Result};
use crate::linalg::top_singular;
use crate::phylayers::{optimize_ris_phases, ris_channel};
use crate::rng::{gaussian_matrix, substream};
use crate::training::{argmax_hits, emulate_ofdm_kernel, train_cnn, CnnConfig, CnnModel, Evaluation, BAND_LEN};

const EVAL_BATCH: usize = 500;
/// Per-link power gain of the transmitter→RIS and RIS→receiver links when
/// the config leaves `pathloss` unset; the noise power per subcarrier is 1.
pub const DEFAULT_RIS_PATHLOSS: f64 = 0.05;

/// A RIS link after phase optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct RisLink {
    pub theta: Vec<f64>,
    /// Largest singular value of the cascaded channel, per subcarrier.
    pub gains: Vec<f64>,
}

/// Draws the frequency-selective links through `n` RIS elements, optimizes
/// the phases and returns the beamformed gain per subcarrier. The direct
/// path is blocked. Element `e` draws from its own stream, so a larger
/// surface contains the smaller one.
pub fn ris_link(n: usize, cfg: &ExperimentConfig) -> Result<RisLink> {
    let a = &cfg.architecture;
    let taps = a.channel_taps;
    let amp = cfg.channel.pathloss.unwrap_or(DEFAULT_RIS_PATHLOSS).sqrt();
    let mut g_taps = vec![CTensor::zeros(n, a.tx_antennas); taps];
    let mut r_taps = vec![CTensor::zeros(a.rx_antennas, n); taps];
    for e in 0..n {
        let mut rng = substream(cfg.seed, "fig4-ris-element", e as u64);
        let g = sample_multitap(1, a.tx_antennas, taps, cfg.channel.tap_decay, &mut rng)?;
        let r = sample_multitap(1, a.rx_antennas, taps, cfg.channel.tap_decay, &mut rng)?;
        for l in 0..taps {
            for j in 0..a.tx_antennas {
                g_taps[l].set(e, j, g[l].get(0, j) * amp);
            }
            for i in 0..a.rx_antennas {
                r_taps[l].set(i, e, r[l].get(0, i) * amp);
            }
        }
    }
    let g = frequency_response(&g_taps, a.subcarriers)?;
    let r = frequency_response(&r_taps, a.subcarriers)?;
    let theta = optimize_ris_phases(&r, &g, None, a.ris_sweeps)?;
    let gains = (0..a.subcarriers).map(|k| Ok(top_singular(&ris_channel(&r[k], &theta, &g[k], None)?).0)).collect::<Result<_>>()?;
    Ok(RisLink { theta, gains })
}

/// The second convolution of a CNN emulated on one link.
#[derive(Clone, Debug)]
pub struct OtaConv {
    /// `C × C` per subcarrier: `h[n] w_{o,i}[n] / α_{o,i}`.
    pub effective: Vec<CTensor>,
    /// Per output channel, `Σ_i 1/α²_{o,i}` at unit budget; divide by
    /// `P_max` for other budgets.
    pub noise_gain: Vec<f64>,
    /// Kernel pairs whose target touched an unreachable subcarrier.
    pub truncated: usize,
}

impl OtaConv {
    pub fn new(model: &CnnModel, gains: &[f64]) -> Result<Self> {
        let c = model.cfg.channels;
        let n_sub = gains.len();
        if n_sub != BAND_LEN {
            return Err(Error::Shape(format!("{n_sub} subcarriers for bands of {BAND_LEN} samples")));
        }
        let h: Vec<Complex64> = gains.iter().map(|&g| Complex64::new(g, 0.0)).collect();
        let mut effective = vec![CTensor::zeros(c, c); n_sub];
        let mut noise_gain = vec![0.0; c];
        let mut truncated = 0;
        for o in 0..c {
            for i in 0..c {
                let k: Vec<Complex64> = model.kernel(o, i).into_iter().map(|t| Complex64::new(t, 0.0)).collect();
                let fit = emulate_ofdm_kernel(&k, &h, 1.0)?;
                if !fit.unreachable.is_empty() {
                    truncated += 1;
                }
                let power: f64 = fit.per_sub_weight.iter().map(|w| w.norm_sqr()).sum();
                if power == 0.0 {
                    continue;
                }
                // full budget: α² = n_sub / Σ|w/α|²
                let alpha = (n_sub as f64 / power).sqrt() * fit.scale_applied;
                let boost = alpha / fit.scale_applied;
                for n in 0..n_sub {
                    effective[n].set(o, i, h[n] * fit.per_sub_weight[n] * boost / alpha);
                }
                noise_gain[o] += 1.0 / (alpha * alpha);
            }
        }
        Ok(Self { effective, noise_gain, truncated })
    }

    /// Noiseless output of the emulated convolution on `C × (BAND_LEN·S)`
    /// features, one OFDM symbol per band.
    pub fn clean(&self, feats: &Matrix) -> Result<Matrix> {
        let c = self.noise_gain.len();
        let n = BAND_LEN;
        if feats.rows() != c || feats.cols() % n != 0 {
            return Err(Error::Shape(format!("features {:?} for {c} channels", feats.shape())));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut out = Matrix::zeros(c, feats.cols());
        let mut spec = vec![vec![Complex64::new(0.0, 0.0); n]; c];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for s in 0..feats.cols() / n {
            for (i, buf) in spec.iter_mut().enumerate() {
                for (t, z) in buf.iter_mut().enumerate() {
                    *z = Complex64::new(feats.get(i, s * n + t), 0.0);
                }
                fwd.process(buf);
            }
            for o in 0..c {
                for (k, yk) in y.iter_mut().enumerate() {
                    let e = &self.effective[k];
                    *yk = (0..c).map(|i| e.get(o, i) * spec[i][k]).sum();
                }
                inv.process(&mut y);
                for t in 0..n {
                    out.set(o, s * n + t, y[t].re / n as f64);
                }
            }
        }
        Ok(out)
    }

    /// Standard deviation of the real output noise of channel `o`.
    ///
    /// Complex noise of power `ρ² v` per subcarrier becomes, after the
    /// inverse DFT and taking the real part, independent real samples of
    /// variance `ρ² v / (2 n_sub)`; `ρ²` is the mean subcarrier power of the
    /// transmitted features.
    pub fn noise_std(&self, o: usize, p_max: f64, feature_power: f64) -> f64 {
        (feature_power * self.noise_gain[o] / (p_max * 2.0 * BAND_LEN as f64)).sqrt()
    }
}

/// Mean power per subcarrier, `E|X̂[n]|²`, of the second-layer input over
/// (up to) the first thousand training images.
pub fn feature_power(model: &CnnModel, train: &ImageDataset) -> Result<f64> {
    let idx: Vec<usize> = (0..train.len().min(1000)).collect();
    let (x, _) = train.batch(&idx);
    let f = model.stem_features(&x)?;
    Ok(BAND_LEN as f64 * f.sum_sq() / f.len() as f64)
}

fn scheme_label(n: usize) -> String {
    format!("ris_N{n}")
}

/// Rows for the digital CNN and for each RIS size across the power sweep.
/// Every point shares the trained CNN and the unit noise draws; a larger
/// surface extends the smaller one.
pub fn run_fig4(cfg: &ExperimentConfig, train: &ImageDataset, test: &ImageDataset, log: &mut dyn FnMut(&str)) -> Result<Vec<MetricsRecord>> {
    let a = &cfg.architecture;
    if a.subcarriers != BAND_LEN {
        return Err(Error::Config(format!("fig4 needs {BAND_LEN} subcarriers, got {}", a.subcarriers)));
    }
    let t0 = Instant::now();
    let mut cnn = CnnModel::new(CnnConfig { classes: a.classes, ..CnnConfig::default() }, train.rows, train.cols, cfg.seed);
    let mut tcfg = cfg.training.cnn.clone();
    tcfg.seed = cfg.seed;
    train_cnn(&mut cnn, train, None, &tcfg)?;
    let digital = cnn.evaluate(test, 1000)?;
    let train_secs = t0.elapsed().as_secs_f64();
    log(&format!("digital CNN accuracy {:.4} loss {:.4} ({train_secs:.1}s)", digital.accuracy, digital.loss));
    let rho2 = feature_power(&cnn, train)?;

    let mut links = Vec::new();
    for &n in &a.ris_elements {
        let link = ris_link(n, cfg)?;
        let ota = OtaConv::new(&cnn, &link.gains)?;
        let (lo, hi) = link.gains.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &g| (l.min(g), h.max(g)));
        log(&format!("N={n}: subcarrier gain {lo:.3e}..{hi:.3e}, {} truncated kernels", ota.truncated));
        links.push((n, ota));
    }

    let powers: Vec<f64> = a.p_max_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let mut hits = vec![vec![0usize; powers.len()]; links.len()];
    let mut loss = vec![vec![0.0; powers.len()]; links.len()];
    let t1 = Instant::now();
    for (b, idx) in batch_iter(test.len(), EVAL_BATCH, None, 0)?.into_iter().enumerate() {
        let (x, y) = test.batch(&idx);
        let feats = cnn.stem_features(&x)?;
        let z = gaussian_matrix(&mut substream(cfg.seed, "fig4-noise", b as u64), feats.rows(), feats.cols(), 1.0);
        for (li, (_, ota)) in links.iter().enumerate() {
            let clean = ota.clean(&feats)?;
            for (pi, &p) in powers.iter().enumerate() {
                let std: Vec<f64> = (0..clean.rows()).map(|o| ota.noise_std(o, p, rho2)).collect();
                let noisy = Matrix::from_fn(clean.rows(), clean.cols(), |o, t| clean.get(o, t) + std[o] * z.get(o, t));
                let logits = cnn.head(&noisy)?;
                hits[li][pi] += argmax_hits(&logits, &y);
                let mut tape = Tape::new();
                let l = tape.constant(logits);
                let xe = tape.softmax_xent(l, &y)?;
                loss[li][pi] += tape.value(xe).item() * idx.len() as f64;
            }
        }
    }
    let per_point = t1.elapsed().as_secs_f64() / (powers.len() * links.len()).max(1) as f64;

    let mut rows = Vec::new();
    let total = test.len() as f64;
    for (pi, &db) in a.p_max_db.iter().enumerate() {
        rows.push(MetricsRecord::new("P_max_dB", db, "upper_bound", digital, cfg.seed, train_secs));
        for (li, (n, _)) in links.iter().enumerate() {
            let ev = Evaluation { accuracy: hits[li][pi] as f64 / total, loss: loss[li][pi] / total };
            log(&format!("N={n:<4} P_max={db:>6.1} dB accuracy {:.4} loss {:.4}", ev.accuracy, ev.loss));
            rows.push(MetricsRecord::new("P_max_dB", db, &scheme_label(*n), ev, cfg.seed, per_point));
        }
    }
    Ok(rows)
}
