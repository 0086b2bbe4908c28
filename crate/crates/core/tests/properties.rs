use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use wpnn::activation::{apply_activation, rapp_amam, saleh_amam_ampm, ActivationModel};
use wpnn::channel::{sample_rayleigh, ChannelRealization};
use wpnn::data::batch_iter;
use wpnn::diffcore::{cmatmul, CTensor, Matrix};
use wpnn::noisemodel::predicted_noise_power;
use wpnn::phylayers::{forward_network, ofdm_conv_forward, BackscatterField, OfdmConvLayer, PhysicalLayer, Readout, RelayHop, RisLayer, RisSimStack, TransceiverLayer, WpnnModel};
use wpnn::rng::{complex_gaussian, complex_gaussian_matrix, stream, substream};
use wpnn::training::emulate_fc;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(200))]

    #[test]
    fn rapp_is_increasing_and_bounded(a in 0.1f64..5.0, p in 0.5f64..10.0, r1 in 0.0f64..20.0, dr in 1e-6f64..5.0) {
        let g1 = rapp_amam(r1, a, p).unwrap();
        let g2 = rapp_amam(r1 + dr, a, p).unwrap();
        prop_assert!(g2 <= a);
        prop_assert!(g1 <= g2);
        // strict wherever the increase is representable
        if g2 < a * (1.0 - 1e-9) {
            prop_assert!(g1 < g2);
        }
    }

    #[test]
    fn rapp_is_linear_for_small_signals(a in 0.1f64..5.0, frac in 1e-6f64..0.1) {
        let r = frac * a;
        prop_assert!((rapp_amam(r, a, 2.0).unwrap() - r).abs() / r <= 1e-3);
    }

    #[test]
    fn saleh_respects_its_peaks(aa in 0.1f64..3.0, ba in 0.1f64..3.0, ap in 0.1f64..3.0, bp in 0.1f64..3.0, r in 0.0f64..50.0) {
        let (amp, phase) = saleh_amam_ampm(r, aa, ba, ap, bp).unwrap();
        prop_assert!(amp <= aa / (2.0 * ba.sqrt()) + 1e-12);
        prop_assert!(phase <= ap / bp + 1e-12);
    }

    #[test]
    fn amplifiers_only_shift_phase_by_am_pm(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-6);
        let z = Complex64::new(re, im);
        let x = CTensor::from_complex(1, 1, &[z]).unwrap();
        let rapp = apply_activation(&x, &ActivationModel::RAPP_DEFAULT).get(0, 0);
        prop_assert!((rapp / z).arg().abs() < 1e-12);
        let s = ActivationModel::SALEH_DEFAULT;
        let (_, am_pm) = saleh_amam_ampm(z.norm(), 1.2, 1.43, 0.37, 0.68).unwrap();
        let out = apply_activation(&x, &s).get(0, 0);
        prop_assert!(((out / z).arg() - am_pm).abs() < 1e-12);
    }
}

fn random_layers(seed: u64) -> Vec<PhysicalLayer> {
    let mut rng = stream(seed, "prop-layers");
    let scale = rng.random_range(0.1..4.0);
    let mut tx = TransceiverLayer::new(Some(complex_gaussian_matrix(&mut rng, 4, 3, scale)), None);
    tx.p_max = Some(rng.random_range(0.1..2.0));
    let mut cm = TransceiverLayer::new(Some(complex_gaussian_matrix(&mut rng, 4, 3, scale)), None);
    cm.constant_modulus = true;
    let mut relay = RelayHop::new(complex_gaussian_matrix(&mut rng, 4, 4, scale), ActivationModel::RAPP_DEFAULT);
    relay.power_cap = Some(rng.random_range(0.1..2.0));
    let tag = BackscatterField::new(complex_gaussian_matrix(&mut rng, 5, 1, scale), complex_gaussian_matrix(&mut rng, 5, 1, 1.0), complex_gaussian_matrix(&mut rng, 5, 1, 1.0), Complex64::new(0.0, 0.0)).unwrap();
    let mut surface = RisLayer::passive(Matrix::from_fn(4, 1, |i, _| i as f64), complex_gaussian_matrix(&mut rng, 4, 4, 1.0)).unwrap();
    surface.amp = Matrix::from_fn(4, 1, |_, _| rng.random_range(0.0..3.0));
    let passive = RisSimStack::passive(None, vec![surface.clone()], None).unwrap();
    let mut active = passive.clone();
    active.active = true;
    active.amp_max = 1.5;
    vec![tx.into(), cm.into(), relay.into(), tag.into(), passive.into(), active.into()]
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn projection_is_feasible_and_idempotent(seed in any::<u64>()) {
        for mut layer in random_layers(seed) {
            layer.project_constraints();
            prop_assert!(layer.is_feasible(1e-9), "{}", layer.name());
            let once = layer.clone();
            layer.project_constraints();
            prop_assert_eq!(&layer, &once, "{}", once.name());
        }
    }

    #[test]
    fn linear_networks_collapse(seed in any::<u64>(), depth in 1usize..=6, dim in 1usize..=5) {
        let mut rng = stream(seed, "prop-collapse");
        let mut layers = Vec::new();
        let mut channels = Vec::new();
        for _ in 0..depth {
            layers.push(RelayHop::new(complex_gaussian_matrix(&mut rng, dim, dim, 1.0 / dim as f64), ActivationModel::Linear).into());
            channels.push(Some(sample_rayleigh(dim, dim, &mut rng).unwrap()));
        }
        let model = WpnnModel { layers, channels, readout: Readout::real_part(dim) };
        let x = complex_gaussian_matrix(&mut rng, dim, 3, 1.0);
        let y = forward_network(&model, &x, None).unwrap();
        let want = cmatmul(&model.collapsed_weight().unwrap(), &x).unwrap().re;
        prop_assert!(y.zip_map(&want, |a, b| (a - b).abs()).max_abs() <= 1e-10);
    }

    #[test]
    fn ofdm_layer_is_circular_convolution(seed in any::<u64>(), log_n in 2u32..=5, k in 1usize..=4) {
        let n = 1usize << log_n;
        let k = k.min(n);
        let mut rng = stream(seed, "prop-ofdm");
        let kernel: Vec<Complex64> = (0..k).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let mut padded = vec![Complex64::new(0.0, 0.0); n];
        padded[..k].copy_from_slice(&kernel);
        // response = DFT of the kernel, put entirely into the weights
        let w: Vec<Complex64> = (0..n)
            .map(|f| (0..n).map(|t| padded[t] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (f * t) as f64 / n as f64)).sum())
            .collect();
        let layer = OfdmConvLayer::new(CTensor::from_complex(n, 1, &w).unwrap(), CTensor::from_fn(n, 1, |_, _| Complex64::new(1.0, 0.0))).unwrap();
        let x: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y = ofdm_conv_forward(&layer, &x).unwrap();
        for t in 0..n {
            let direct: Complex64 = (0..k).map(|j| kernel[j] * x[(t + n - j) % n]).sum();
            prop_assert!((y.get(t, 0) - direct).norm() <= 1e-10);
        }
    }

    #[test]
    fn noise_budget_adds_up_and_grows(seed in any::<u64>(), depth in 1usize..=5, dim in 1usize..=6) {
        let mut rng = stream(seed, "prop-noise");
        let ws: Vec<CTensor> = (0..=depth).map(|_| complex_gaussian_matrix(&mut rng, dim, dim, 1.0)).collect();
        let sig: Vec<f64> = (0..=depth).map(|_| rng.random_range(0.01..1.0)).collect();
        let b = predicted_noise_power(&ws[..depth], &sig[..depth]).unwrap();
        prop_assert!(b.per_layer_contrib.iter().all(|&c| c >= 0.0));
        prop_assert!((b.total - b.per_layer_contrib.iter().sum::<f64>()).abs() <= 1e-12 * b.total.max(1.0));
        // appending an identity layer that adds its own noise
        let mut ws2 = ws[..depth].to_vec();
        ws2.push(CTensor::identity(dim));
        let mut s2 = sig[..depth].to_vec();
        s2.push(sig[depth]);
        prop_assert!(predicted_noise_power(&ws2, &s2).unwrap().total >= b.total);
    }

    #[test]
    fn emulation_is_exact_on_invertible_links(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = substream(seed, "prop-emulate", n as u64);
        let w = complex_gaussian_matrix(&mut rng, n, n, 1.0);
        let h = sample_rayleigh(n, n, &mut rng).unwrap();
        let fit = emulate_fc(&w, &h, f64::INFINITY).unwrap();
        prop_assert!(fit.residual_fro <= 1e-8 * (1.0 + w.norm_sq().sqrt()));
        prop_assert_eq!(fit.scale_applied, 1.0);
    }

    #[test]
    fn batches_partition_the_set(n in 1usize..300, bs in 1usize..64, seed in any::<u64>(), epoch in 0u64..4) {
        let batches = batch_iter(n, bs, Some(seed), epoch).unwrap();
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        prop_assert!(batches.iter().all(|b| b.len() <= bs && !b.is_empty()));
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(batches, batch_iter(n, bs, Some(seed), epoch).unwrap());
    }

    #[test]
    fn channel_draws_are_reproducible(seed in any::<u64>()) {
        let a: ChannelRealization = sample_rayleigh(3, 2, &mut stream(seed, "prop-ch")).unwrap();
        let b = sample_rayleigh(3, 2, &mut stream(seed, "prop-ch")).unwrap();
        prop_assert_eq!(a, b);
    }
}
