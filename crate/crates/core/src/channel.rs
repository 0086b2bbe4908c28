//! Channel realizations, additive noise and CSI acquisition.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diffcore::{cmatmul, CTensor};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, complex_gaussian_matrix};

/// One sampled channel matrix `h` (`n_rx × n_tx`) with a linear power
/// path loss. The link applies `sqrt(pathloss) · h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h: CTensor,
    pub pathloss: f64,
    pub coherence_id: u64,
}

impl ChannelRealization {
    pub fn new(h: CTensor, pathloss: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::Contract("channel entries must be finite".into()));
        }
        if !(pathloss > 0.0 && pathloss.is_finite()) {
            return Err(Error::Contract(format!("pathloss must be positive, got {pathloss}")));
        }
        Ok(Self { h, pathloss, coherence_id: 0 })
    }

    pub fn identity(n: usize) -> Self {
        Self { h: CTensor::identity(n), pathloss: 1.0, coherence_id: 0 }
    }

    pub fn with_pathloss(mut self, pathloss: f64) -> Result<Self> {
        if !(pathloss > 0.0 && pathloss.is_finite()) {
            return Err(Error::Contract(format!("pathloss must be positive, got {pathloss}")));
        }
        self.pathloss = pathloss;
        Ok(self)
    }

    pub fn n_rx(&self) -> usize {
        self.h.rows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.cols()
    }

    /// The matrix the link actually applies.
    pub fn effective(&self) -> CTensor {
        if self.pathloss == 1.0 {
            self.h.clone()
        } else {
            self.h.scaled(self.pathloss.sqrt())
        }
    }
}

/// Per-entry complex noise variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl NoiseSpec {
    pub const NONE: Self = Self { sigma2: 0.0, snr_db: None };

    pub fn from_sigma2(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Contract(format!("noise variance must be nonnegative, got {sigma2}")));
        }
        Ok(Self { sigma2, snr_db: None })
    }

    /// Noise variance for unit signal power at the given SNR.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self { sigma2: 10f64.powf(-snr_db / 10.0), snr_db: Some(snr_db) }
    }

    pub fn is_silent(&self) -> bool {
        self.sigma2 == 0.0
    }
}

/// i.i.d. `CN(0, 1)` entries, path loss 1.
pub fn sample_rayleigh<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> Result<ChannelRealization> {
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::Shape(format!("channel dimensions must be positive, got {n_rx}×{n_tx}")));
    }
    Ok(ChannelRealization { h: complex_gaussian_matrix(rng, n_rx, n_tx, 1.0), pathloss: 1.0, coherence_id: 0 })
}

/// `x + n` with `n` i.i.d. `CN(0, sigma2)`.
pub fn awgn<R: Rng + ?Sized>(x: &CTensor, spec: &NoiseSpec, rng: &mut R) -> Result<CTensor> {
    if spec.sigma2 < 0.0 || !spec.sigma2.is_finite() {
        return Err(Error::Contract(format!("noise variance must be nonnegative, got {}", spec.sigma2)));
    }
    if spec.sigma2 == 0.0 {
        return Ok(x.clone());
    }
    let (r, c) = x.shape();
    Ok(CTensor::from_fn(r, c, |i, j| x.get(i, j) + complex_gaussian(rng, spec.sigma2)))
}

/// Channel estimate with the per-entry variance of its error.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiEstimate {
    pub h_hat: CTensor,
    pub error_var: f64,
}

impl CsiEstimate {
    /// The estimate as a realization usable by layers (path loss folded in).
    pub fn as_realization(&self) -> ChannelRealization {
        ChannelRealization { h: self.h_hat.clone(), pathloss: 1.0, coherence_id: 0 }
    }
}

/// Orthogonal pilot block: the first `n_tx` rows of the `n_pilots`-point DFT,
/// scaled so every pilot symbol has power `pilot_power`. `P Pᴴ = pp·np·I`.
pub fn dft_pilots(n_tx: usize, n_pilots: usize, pilot_power: f64) -> CTensor {
    let amp = pilot_power.sqrt();
    CTensor::from_fn(n_tx, n_pilots, |i, t| {
        let angle = -2.0 * std::f64::consts::PI * (i * t) as f64 / n_pilots as f64;
        Complex64::from_polar(amp, angle)
    })
}

/// Least-squares estimate of the effective channel from orthogonal pilots.
///
/// The receiver observes `Y = H P + N` and forms `Ĥ = Y Pᴴ / (pp·np)`. Each
/// entry of the error `N Pᴴ / (pp·np)` has variance `σ² / (pp·np)`.
pub fn estimate_csi_ls<R: Rng + ?Sized>(
    h_true: &ChannelRealization,
    pilot_power: f64,
    n_pilots: usize,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<CsiEstimate> {
    let n_tx = h_true.n_tx();
    if n_pilots < n_tx {
        return Err(Error::UnderDetermined { pilots: n_pilots, tx: n_tx });
    }
    if !(pilot_power > 0.0) {
        return Err(Error::Contract(format!("pilot power must be positive, got {pilot_power}")));
    }
    let h = h_true.effective();
    if spec.sigma2 == 0.0 {
        return Ok(CsiEstimate { h_hat: h, error_var: 0.0 });
    }
    let p = dft_pilots(n_tx, n_pilots, pilot_power);
    let y = awgn(&cmatmul(&h, &p)?, spec, rng)?;
    let energy = pilot_power * n_pilots as f64;
    let h_hat = cmatmul(&y, &p.adjoint())?.scaled(1.0 / energy);
    Ok(CsiEstimate { h_hat, error_var: spec.sigma2 / energy })
}

/// Directly perturbs the channel with `CN(0, error_var)` entries.
pub fn corrupt_csi<R: Rng + ?Sized>(h_true: &ChannelRealization, error_var: f64, rng: &mut R) -> Result<CsiEstimate> {
    if !(error_var >= 0.0 && error_var.is_finite()) {
        return Err(Error::Contract(format!("error variance must be nonnegative, got {error_var}")));
    }
    let h_hat = awgn(&h_true.effective(), &NoiseSpec { sigma2: error_var, snr_db: None }, rng)?;
    Ok(CsiEstimate { h_hat, error_var })
}

/// Frequency-selective MIMO channel: `taps[l]` is the `n_rx × n_tx` impulse
/// response at delay `l`, with an exponential power-delay profile normalized
/// to unit total power per entry.
pub fn sample_multitap<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, n_taps: usize, decay: f64, rng: &mut R) -> Result<Vec<CTensor>> {
    if n_rx == 0 || n_tx == 0 || n_taps == 0 {
        return Err(Error::Shape(format!("multitap channel needs positive sizes, got {n_rx}×{n_tx}×{n_taps}")));
    }
    let profile: Vec<f64> = (0..n_taps).map(|l| (-decay * l as f64).exp()).collect();
    let total: f64 = profile.iter().sum();
    Ok(profile.iter().map(|p| complex_gaussian_matrix(rng, n_rx, n_tx, p / total)).collect())
}

/// Per-subcarrier matrices `H_k = Σ_l taps[l] e^{-2πi kl/n_sub}`.
pub fn frequency_response(taps: &[CTensor], n_sub: usize) -> Result<Vec<CTensor>> {
    let first = taps.first().ok_or_else(|| Error::Shape("empty tap list".into()))?;
    if taps.len() > n_sub {
        return Err(Error::Shape(format!("{} taps exceed {n_sub} subcarriers", taps.len())));
    }
    let (r, c) = first.shape();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_sub);
    let mut out = vec![CTensor::zeros(r, c); n_sub];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_sub];
    for i in 0..r {
        for j in 0..c {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (l, t) in taps.iter().enumerate() {
                if t.shape() != (r, c) {
                    return Err(Error::Shape("taps have different shapes".into()));
                }
                buf[l] = t.get(i, j);
            }
            fft.process(&mut buf);
            for (k, z) in buf.iter().enumerate() {
                out[k].set(i, j, *z);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rayleigh_is_deterministic() {
        let a = sample_rayleigh(3, 2, &mut stream(5, "channel")).unwrap();
        let b = sample_rayleigh(3, 2, &mut stream(5, "channel")).unwrap();
        assert_eq!(a, b);
        assert!(sample_rayleigh(0, 2, &mut stream(5, "channel")).is_err());
    }

    #[test]
    fn rayleigh_moments() {
        let mut s = stream(1, "channel");
        let n = 100_000;
        let (mut sum, mut power) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            let z = sample_rayleigh(1, 1, &mut s).unwrap().h.get(0, 0);
            sum += z;
            power += z.norm_sqr();
        }
        assert!((power / n as f64 - 1.0).abs() < 0.02);
        assert!((sum / n as f64).norm() <= 0.01);
    }

    #[test]
    fn awgn_cases() {
        let x = CTensor::from_fn(2, 2, |i, j| Complex64::new(i as f64, j as f64));
        assert_eq!(awgn(&x, &NoiseSpec::NONE, &mut stream(0, "noise")).unwrap(), x);
        assert!(awgn(&x, &NoiseSpec { sigma2: -1.0, snr_db: None }, &mut stream(0, "noise")).is_err());
        assert!((NoiseSpec::from_snr_db(30.0).sigma2 - 0.001).abs() < 1e-15);

        let zero = CTensor::zeros(1, 100_000);
        let n = awgn(&zero, &NoiseSpec { sigma2: 1.0, snr_db: None }, &mut stream(0, "noise")).unwrap();
        assert!((n.norm_sq() / 100_000.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        let h = sample_rayleigh(3, 4, &mut stream(2, "channel")).unwrap();
        let est = estimate_csi_ls(&h, 1.0, 4, &NoiseSpec::NONE, &mut stream(2, "noise")).unwrap();
        assert_eq!(est.h_hat, h.h);
        assert_eq!(est.error_var, 0.0);
        let err = estimate_csi_ls(&h, 1.0, 3, &NoiseSpec::NONE, &mut stream(2, "noise")).unwrap_err();
        assert!(matches!(err, Error::UnderDetermined { pilots: 3, tx: 4 }));
    }

    #[test]
    fn pilots_are_orthogonal() {
        let p = dft_pilots(3, 5, 2.0);
        let g = cmatmul(&p, &p.adjoint()).unwrap();
        assert!(g.max_abs_diff(&CTensor::identity(3).scaled(10.0)) < 1e-12);
    }

    #[test]
    fn ls_error_variance_formula() {
        let h = sample_rayleigh(2, 3, &mut stream(4, "channel")).unwrap();
        let spec = NoiseSpec::from_sigma2(0.01).unwrap();
        let a = estimate_csi_ls(&h, 1.0, 10, &spec, &mut stream(4, "noise")).unwrap();
        assert!((a.error_var - 0.001).abs() < 1e-15);
        let b = estimate_csi_ls(&h, 2.0, 10, &spec, &mut stream(4, "noise")).unwrap();
        assert!((b.error_var - a.error_var / 2.0).abs() < 1e-15);
    }

    #[test]
    fn corrupt_zero_is_copy() {
        let h = sample_rayleigh(2, 2, &mut stream(6, "channel")).unwrap();
        assert_eq!(corrupt_csi(&h, 0.0, &mut stream(6, "csi")).unwrap().h_hat, h.h);
    }

    #[test]
    fn flat_multitap_response() {
        let taps = vec![CTensor::identity(2)];
        for hk in frequency_response(&taps, 4).unwrap() {
            assert!(hk.max_abs_diff(&CTensor::identity(2)) < 1e-15);
        }
        // a one-sample delay rotates subcarrier k by e^{-2πik/n}
        let taps = vec![CTensor::zeros(1, 1), CTensor::identity(1)];
        let f = frequency_response(&taps, 4).unwrap();
        assert!((f[1].get(0, 0) - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }
}
