//! How injected noise accumulates through a chain of physical layers.
//!
//! In the linear regime, white noise of variance `σ_l²` injected after layer
//! `l` reaches the output through `W_L ⋯ W_{l+1}`, so the output noise power
//! is `Σ_l σ_l² ‖W_L ⋯ W_{l+1}‖_F²`. For nonlinear networks only the Monte
//! Carlo estimate applies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationModel;
use crate::diffcore::{cmatmul, CTensor};
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::phylayers::{dft_matrix, idft_matrix, PhysicalLayer, WpnnModel};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNorm {
    /// Exact for white noise: `E‖M n‖² = σ² ‖M‖_F²`.
    #[default]
    Frobenius,
    /// Upper bound `σ² · cols(M) · ‖M‖₂²`.
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub per_layer_contrib: Vec<f64>,
    pub total: f64,
    pub norm_used: NoiseNorm,
}

/// Closed-form output noise power of the chain `W_1, …, W_L` with noise
/// variances `sigma2[l]` injected after each `W_l`.
pub fn predicted_noise_power(weights: &[CTensor], sigma2: &[f64]) -> Result<NoiseBudget> {
    predicted_noise_power_with(weights, sigma2, NoiseNorm::Frobenius)
}

pub fn predicted_noise_power_with(weights: &[CTensor], sigma2: &[f64], norm: NoiseNorm) -> Result<NoiseBudget> {
    if weights.len() != sigma2.len() {
        return Err(Error::Shape(format!("{} weights but {} noise variances", weights.len(), sigma2.len())));
    }
    if let Some(s) = sigma2.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Contract(format!("noise variance must be nonnegative, got {s}")));
    }
    for w in weights.windows(2) {
        if w[1].cols() != w[0].rows() {
            return Err(Error::Shape(format!("chain breaks between {:?} and {:?}", w[0].shape(), w[1].shape())));
        }
    }
    let l = weights.len();
    let mut contrib = vec![0.0; l];
    // suffix product M = W_L ⋯ W_{l+1}, starting from the identity
    let mut suffix: Option<CTensor> = None;
    for i in (0..l).rev() {
        let gain = match (&suffix, norm) {
            (None, _) => weights[i].rows() as f64,
            (Some(m), NoiseNorm::Frobenius) => m.norm_sq(),
            (Some(m), NoiseNorm::Spectral) => m.cols() as f64 * spectral_norm(m).powi(2),
        };
        contrib[i] = sigma2[i] * gain;
        suffix = Some(match suffix {
            None => weights[i].clone(),
            Some(m) => cmatmul(&m, &weights[i])?,
        });
    }
    Ok(NoiseBudget { total: contrib.iter().sum(), per_layer_contrib: contrib, norm_used: norm })
}

/// The linear chain of a model: each layer split into the map before its
/// noise injection (carrying `σ²`) and the map after it (noise-free).
/// Activations, power-cap scaling and biases are ignored.
pub fn noise_chain(model: &WpnnModel) -> Result<(Vec<CTensor>, Vec<f64>)> {
    let mut w = Vec::new();
    let mut s = Vec::new();
    for (layer, ch) in model.layers.iter().zip(&model.channels) {
        match layer {
            PhysicalLayer::Transceiver(t) => {
                let mut pre = t.precoder.clone();
                if let Some(ch) = ch {
                    let h = ch.effective();
                    pre = Some(match pre {
                        Some(f) => cmatmul(&h, &f)?,
                        None => h,
                    });
                }
                let n_out = match (&pre, &t.combiner) {
                    (Some(p), _) => p.rows(),
                    (None, Some(c)) => c.cols(),
                    (None, None) => return Err(Error::Contract("transceiver without fixed dimension".into())),
                };
                w.push(pre.unwrap_or_else(|| CTensor::identity(n_out)));
                s.push(t.noise.sigma2);
                if let Some(c) = &t.combiner {
                    w.push(c.clone());
                    s.push(0.0);
                }
            }
            PhysicalLayer::RelayHop(r) => {
                w.push(ch.as_ref().map(|c| c.effective()).unwrap_or_else(|| CTensor::identity(r.gain.cols())));
                s.push(r.noise.sigma2);
                w.push(r.gain.clone());
                s.push(0.0);
            }
            PhysicalLayer::Backscatter(b) => {
                w.push(CTensor::from_complex(1, 1, &[b.effective_gain()])?);
                s.push(b.noise.sigma2);
            }
            PhysicalLayer::RisSim(r) => {
                let mut inner = r.clone();
                inner.combiner = None;
                w.push(inner.effective_weight()?);
                s.push(r.noise.sigma2);
                if let Some(c) = &r.combiner {
                    w.push(c.clone());
                    s.push(0.0);
                }
            }
            PhysicalLayer::OfdmConv(o) => {
                let n = o.n_sub;
                let g = o.groups();
                let f = dft_matrix(n);
                let finv = idft_matrix(n);
                let mut pre = CTensor::zeros(n * g, n);
                let mut post = CTensor::zeros(n * g, n * g);
                for gi in 0..g {
                    let d = o.response(gi);
                    for i in 0..n {
                        for j in 0..n {
                            pre.set(gi * n + i, j, d[i] * f.get(i, j));
                            post.set(gi * n + i, gi * n + j, finv.get(i, j));
                        }
                    }
                }
                w.push(pre);
                s.push(o.noise.sigma2);
                w.push(post);
                s.push(0.0);
            }
        }
    }
    Ok((w, s))
}

/// Empirical `E‖y(0; noise) − y(0; no noise)‖²` at the complex output of the
/// last layer, averaged over `trials` independent noise draws.
pub fn monte_carlo_noise_power(model: &WpnnModel, trials: usize, rng: &mut Stream) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Contract("at least one trial is required".into()));
    }
    let first = model.layers.first().ok_or_else(|| Error::Contract("model without layers".into()))?;
    let d_in = first.effective_weight(model.channels[0].as_ref())?.cols();
    const CHUNK: usize = 20_000;
    let mut total = 0.0;
    let mut done = 0;
    while done < trials {
        let n = CHUNK.min(trials - done);
        let x = CTensor::zeros(d_in, n);
        let clean = output(model, &x, None)?;
        let noisy = output(model, &x, Some(rng))?;
        total += noisy.sub(&clean)?.norm_sq();
        done += n;
    }
    Ok(total / trials as f64)
}

fn output(model: &WpnnModel, x: &CTensor, noise: Option<&mut Stream>) -> Result<CTensor> {
    let mut t = crate::diffcore::Tape::new();
    let rec = model.record(&mut t, x, noise, false)?;
    let last = *rec.layer_outputs.last().ok_or_else(|| Error::Contract("model without layers".into()))?;
    Ok(t.cvalue(last))
}

/// Returned by [`depth_bound`] when no depth violates the floor.
pub const UNBOUNDED_DEPTH: usize = usize::MAX;

const DEPTH_SCAN_LIMIT: usize = 1_000_000;

/// Largest depth `L` whose predicted output SNR stays at or above the floor,
/// treating `norms[l]` as the gain of every layer after injection `l`:
/// `noise(L) = Σ_{l≤L} σ_l² · dim · ∏_{l<k≤L} norms[k]²`.
///
/// Entries past the end of `norms`/`sigma2` repeat the last one. Returns 0
/// if even one layer fails and [`UNBOUNDED_DEPTH`] if the noise never
/// crosses the floor (zero noise, or a convergent sum).
pub fn depth_bound(norms: &[f64], sigma2: &[f64], snr_floor_db: f64, signal_power: f64, dim: usize) -> Result<usize> {
    if norms.is_empty() || sigma2.is_empty() {
        return Err(Error::Contract("norms and noise variances must be nonempty".into()));
    }
    if let Some(n) = norms.iter().find(|n| !(**n > 0.0)) {
        return Err(Error::Contract(format!("norms must be positive, got {n}")));
    }
    let at = |v: &[f64], i: usize| v[i.min(v.len() - 1)];
    let limit = signal_power * 10f64.powf(-snr_floor_db / 10.0);
    let tol = 1e-12 * limit.abs().max(f64::MIN_POSITIVE);
    let mut noise = 0.0;
    for l in 0..DEPTH_SCAN_LIMIT {
        noise = noise * at(norms, l).powi(2) + at(sigma2, l) * dim as f64;
        if noise > limit + tol {
            return Ok(l);
        }
        // past the explicit vectors the recursion is stationary; stop once it
        // has converged below the limit
        if l >= norms.len().max(sigma2.len()) && at(norms, l) < 1.0 {
            let fixed = at(sigma2, l) * dim as f64 / (1.0 - at(norms, l).powi(2));
            if fixed <= limit + tol && noise <= fixed {
                return Ok(UNBOUNDED_DEPTH);
            }
        }
    }
    Ok(UNBOUNDED_DEPTH)
}

/// Random all-linear relay chain used by the oracle checks: depth `depth`,
/// width `dim`, gains scaled to keep the output power moderate.
pub fn random_linear_chain(depth: usize, dim: usize, sigma2: f64, rng: &mut Stream) -> Result<WpnnModel> {
    use crate::channel::{sample_rayleigh, NoiseSpec};
    use crate::phylayers::{Readout, RelayHop};
    use crate::rng::complex_gaussian_matrix;
    let mut layers = Vec::with_capacity(depth);
    let mut channels = Vec::with_capacity(depth);
    for _ in 0..depth {
        let scale = rng.random_range(0.5..1.5) / dim as f64;
        let mut hop = RelayHop::new(complex_gaussian_matrix(rng, dim, dim, scale), ActivationModel::Linear);
        hop.noise = NoiseSpec::from_sigma2(sigma2)?;
        layers.push(hop.into());
        channels.push(Some(sample_rayleigh(dim, dim, rng)?));
    }
    Ok(WpnnModel { layers, channels, readout: Readout::real_part(dim) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn scalar_single_layer() {
        let w = CTensor::from_complex(1, 1, &[num_complex::Complex64::new(3.0, 1.0)]).unwrap();
        let b = predicted_noise_power(&[w], &[0.25]).unwrap();
        assert_eq!(b.total, 0.25);
    }

    #[test]
    fn two_layer_hand_expansion() {
        let w1 = CTensor::identity(2);
        let w2 = CTensor::identity(2).scaled(2.0);
        let b = predicted_noise_power(&[w1, w2], &[1.0, 1.0]).unwrap();
        assert_eq!(b.per_layer_contrib, vec![8.0, 2.0]);
        assert!((b.total - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn identity_chain() {
        let ws = vec![CTensor::identity(3); 4];
        let b = predicted_noise_power(&ws, &[0.5; 4]).unwrap();
        assert!((b.total - 4.0 * 3.0 * 0.5).abs() <= 1e-12);
    }

    #[test]
    fn rejects_broken_chain() {
        assert!(predicted_noise_power(&[CTensor::identity(2), CTensor::identity(3)], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn spectral_bounds_frobenius() {
        let mut s = stream(2, "t");
        let ws: Vec<CTensor> = (0..3).map(|_| crate::rng::complex_gaussian_matrix(&mut s, 3, 3, 1.0)).collect();
        let f = predicted_noise_power(&ws, &[1.0; 3]).unwrap();
        let sp = predicted_noise_power_with(&ws, &[1.0; 3], NoiseNorm::Spectral).unwrap();
        assert!(sp.total >= f.total - 1e-9);
    }

    #[test]
    fn depth_bound_examples() {
        // L·σ² ≤ 10^(−2): ten layers of 0.001
        assert_eq!(depth_bound(&[1.0], &[0.001], 20.0, 1.0, 1).unwrap(), 10);
        assert_eq!(depth_bound(&[1.0], &[0.0001], 20.0, 1.0, 1).unwrap(), 100);
        assert_eq!(depth_bound(&[1.0], &[0.0], 20.0, 1.0, 1).unwrap(), UNBOUNDED_DEPTH);
        assert_eq!(depth_bound(&[1.0], &[0.5], 20.0, 1.0, 1).unwrap(), 0);
        // norms below 1 converge to σ²/(1 − n²) = 0.004 < 0.01
        assert_eq!(depth_bound(&[0.5], &[0.003], 20.0, 1.0, 1).unwrap(), UNBOUNDED_DEPTH);
    }

    #[test]
    fn depth_bound_matches_scan() {
        // norm 2: noise(L) = σ² Σ_{l=1}^{L} 4^{L−l}
        for (sigma2, floor) in [(1e-4, 10.0), (1e-3, 0.0), (1e-6, 20.0)] {
            let limit = 10f64.powf(-floor / 10.0);
            let mut expect = 0;
            for l in 1..60 {
                let noise: f64 = (1..=l).map(|k| sigma2 * 4f64.powi((l - k) as i32)).sum();
                if noise <= limit * (1.0 + 1e-12) {
                    expect = l;
                } else {
                    break;
                }
            }
            assert_eq!(depth_bound(&[2.0], &[sigma2], floor, 1.0, 1).unwrap(), expect);
        }
    }

    #[test]
    fn noiseless_model_has_zero_mc_noise() {
        let m = random_linear_chain(2, 3, 0.0, &mut stream(1, "chain")).unwrap();
        assert_eq!(monte_carlo_noise_power(&m, 100, &mut stream(1, "noise")).unwrap(), 0.0);
    }
}
