use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::diffcore::{cmatmul, CTensor};
use crate::error::{Error, Result};
use crate::linalg::pinv;

/// Relative cutoff for singular values treated as zero in the fit.
const PINV_RCOND: f64 = 1e-10;

/// Physical gain fitted to a digital weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmulationResult {
    /// Gain after power scaling.
    pub fitted: CTensor,
    /// `‖G H − W*‖_F` of the unscaled least-squares fit.
    pub residual_fro: f64,
    /// Factor `≤ 1` applied to meet the power cap.
    pub scale_applied: f64,
}

/// Least-squares relay gain `G = W* H⁺` so that `G H ≈ W*`, then scaled
/// down to `‖G‖_F² ≤ power_cap` (pass `f64::INFINITY` for no cap).
pub fn emulate_fc(w_target: &CTensor, h: &ChannelRealization, power_cap: f64) -> Result<EmulationResult> {
    let he = h.effective();
    if w_target.cols() != he.rows() {
        return Err(Error::Shape(format!("target {:?} cannot follow channel {:?}", w_target.shape(), he.shape())));
    }
    if !(power_cap > 0.0) {
        return Err(Error::Contract(format!("power cap must be positive, got {power_cap}")));
    }
    let g = cmatmul(w_target, &pinv(&he, PINV_RCOND)?)?;
    let residual_fro = cmatmul(&g, &he)?.sub(w_target)?.norm_sq().sqrt();
    let p = g.norm_sq();
    let scale_applied = if p > power_cap { (power_cap / p).sqrt() } else { 1.0 };
    Ok(EmulationResult { fitted: g.scaled(scale_applied), residual_fro, scale_applied })
}

/// Subcarrier gains below this magnitude cannot be inverted.
pub const UNREACHABLE_GAIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OfdmEmulation {
    pub per_sub_weight: Vec<Complex64>,
    /// `Σ_n |K̂[n] − w[n] h[n]|²` before scaling: the target energy on
    /// unreachable subcarriers.
    pub residual: f64,
    pub scale_applied: f64,
    pub unreachable: Vec<usize>,
}

/// Zero-padded DFT of a kernel.
pub(crate) fn kernel_spectrum(kernel: &[Complex64], n_sub: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n_sub];
    buf[..kernel.len()].copy_from_slice(kernel);
    FftPlanner::new().plan_fft_forward(n_sub).process(&mut buf);
    buf
}

/// Per-subcarrier weights `w[n] = DFT(k)[n] / h[n]`, scaled so that
/// `Σ|w|² ≤ p_max · n_sub`.
pub fn emulate_ofdm_kernel(kernel: &[Complex64], channel_gain: &[Complex64], p_max: f64) -> Result<OfdmEmulation> {
    let n = channel_gain.len();
    if kernel.is_empty() || kernel.len() > n {
        return Err(Error::Shape(format!("kernel of length {} on {n} subcarriers", kernel.len())));
    }
    if !(p_max > 0.0) {
        return Err(Error::Contract(format!("power budget must be positive, got {p_max}")));
    }
    let target = kernel_spectrum(kernel, n);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut unreachable = Vec::new();
    let mut residual = 0.0;
    for k in 0..n {
        if channel_gain[k].norm() < UNREACHABLE_GAIN {
            unreachable.push(k);
            residual += target[k].norm_sqr();
        } else {
            w[k] = target[k] / channel_gain[k];
        }
    }
    let power: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let budget = p_max * n as f64;
    let scale_applied = if power > budget { (budget / power).sqrt() } else { 1.0 };
    for z in &mut w {
        *z *= scale_applied;
    }
    Ok(OfdmEmulation { per_sub_weight: w, residual, scale_applied, unreachable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use crate::phylayers::{ofdm_conv_forward, OfdmConvLayer};
    use crate::rng::{complex_gaussian, complex_gaussian_matrix, stream};

    #[test]
    fn identity_and_scaled_channels() {
        let w = complex_gaussian_matrix(&mut stream(1, "w"), 3, 3, 1.0);
        let r = emulate_fc(&w, &ChannelRealization::identity(3), f64::INFINITY).unwrap();
        assert!(r.fitted.max_abs_diff(&w) < 1e-12 && r.residual_fro < 1e-12 && r.scale_applied == 1.0);

        let h = ChannelRealization::new(CTensor::identity(3).scaled(2.0), 1.0).unwrap();
        let r = emulate_fc(&CTensor::identity(3), &h, f64::INFINITY).unwrap();
        assert!(r.fitted.max_abs_diff(&CTensor::identity(3).scaled(0.5)) < 1e-12);
        assert!(r.residual_fro < 1e-12);
    }

    #[test]
    fn binding_cap_is_recorded() {
        let w = CTensor::identity(4);
        let r = emulate_fc(&w, &ChannelRealization::identity(4), 1.0).unwrap();
        assert!((r.scale_applied - 0.5).abs() < 1e-12);
        assert!((r.fitted.norm_sq() - 1.0).abs() < 1e-12);
        assert!(r.residual_fro < 1e-12);
    }

    #[test]
    fn rank_deficient_residual_matches_projection() {
        let mut rng = stream(2, "rd");
        let a = complex_gaussian_matrix(&mut rng, 5, 2, 1.0);
        let b = complex_gaussian_matrix(&mut rng, 2, 5, 1.0);
        let h = cmatmul(&a, &b).unwrap();
        assert!(singular_values(&h)[2] < 1e-10);
        let w = complex_gaussian_matrix(&mut rng, 3, 5, 1.0);
        let r = emulate_fc(&w, &ChannelRealization::new(h.clone(), 1.0).unwrap(), f64::INFINITY).unwrap();
        // W (I − P) with P the projector onto the row space of H, from the SVD
        let svd = crate::linalg::to_na(&h).svd(false, true);
        let vt = svd.v_t.unwrap();
        let rows = crate::linalg::from_na(&vt.rows(0, 2).into_owned());
        let proj = cmatmul(&rows.adjoint(), &rows).unwrap();
        let oracle = w.sub(&cmatmul(&w, &proj).unwrap()).unwrap().norm_sq().sqrt();
        assert!((r.residual_fro - oracle).abs() <= 1e-8, "{} vs {oracle}", r.residual_fro);
    }

    fn circ(x: &[Complex64], k: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n).map(|t| k.iter().enumerate().map(|(j, kj)| kj * x[(t + n - j) % n]).sum()).collect()
    }

    #[test]
    fn flat_channel_reproduces_convolution() {
        let mut rng = stream(3, "ofdm");
        let n = 16;
        let k: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let gain = vec![Complex64::new(1.0, 0.0); n];
        let e = emulate_ofdm_kernel(&k, &gain, 1e6).unwrap();
        assert_eq!(e.scale_applied, 1.0);
        let layer = OfdmConvLayer::new(CTensor::from_complex(n, 1, &e.per_sub_weight).unwrap(), CTensor::from_complex(n, 1, &gain).unwrap()).unwrap();
        let x: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y = ofdm_conv_forward(&layer, &x).unwrap();
        for (t, z) in circ(&x, &k).iter().enumerate() {
            assert!((y.get(t, 0) - z).norm() <= 1e-10);
        }
    }

    #[test]
    fn identity_kernel_inverts_gains() {
        let mut rng = stream(4, "g");
        let gain: Vec<Complex64> = (0..8).map(|_| complex_gaussian(&mut rng, 1.0) + 0.5).collect();
        let e = emulate_ofdm_kernel(&[Complex64::new(1.0, 0.0)], &gain, 1e6).unwrap();
        for (w, h) in e.per_sub_weight.iter().zip(&gain) {
            assert!((w * h - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn zeroed_subcarrier_costs_its_energy() {
        let mut rng = stream(5, "z");
        let n = 8;
        let k: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let mut gain = vec![Complex64::new(1.0, 0.0); n];
        gain[3] = Complex64::new(0.0, 0.0);
        let e = emulate_ofdm_kernel(&k, &gain, 1e6).unwrap();
        assert_eq!(e.unreachable, vec![3]);
        assert_eq!(e.per_sub_weight[3], Complex64::new(0.0, 0.0));
        // Parseval: frequency-domain energy is n times the time-domain gap
        let layer = OfdmConvLayer::new(CTensor::from_complex(n, 1, &e.per_sub_weight).unwrap(), CTensor::from_complex(n, 1, &gain).unwrap()).unwrap();
        let mut delta = vec![Complex64::new(0.0, 0.0); n];
        delta[0] = Complex64::new(1.0, 0.0);
        let realized = ofdm_conv_forward(&layer, &delta).unwrap();
        let gap: f64 = (0..n).map(|t| (realized.get(t, 0) - k.get(t).copied().unwrap_or_default()).norm_sqr()).sum();
        assert!(e.residual > 0.0);
        assert!((e.residual - n as f64 * gap).abs() < 1e-10);
    }

    #[test]
    fn power_budget_scales() {
        let e = emulate_ofdm_kernel(&[Complex64::new(2.0, 0.0)], &[Complex64::new(1.0, 0.0); 4], 1.0).unwrap();
        assert!((e.scale_applied - 0.5).abs() < 1e-12);
        assert!(emulate_ofdm_kernel(&[Complex64::new(1.0, 0.0); 5], &[Complex64::new(1.0, 0.0); 4], 1.0).is_err());
    }
}
