//! A convolution kernel emulated by per-subcarrier weights over a
//! frequency-selective channel, checked against direct circular convolution.

use num_complex::Complex64;
use wpnn::channel::{frequency_response, sample_multitap};
use wpnn::diffcore::CTensor;
use wpnn::phylayers::{ofdm_conv_forward, OfdmConvLayer};
use wpnn::rng::{complex_gaussian, stream};
use wpnn::training::emulate_ofdm_kernel;

fn main() -> wpnn::Result<()> {
    let n = 16;
    let mut rng = stream(5, "ofdm-example");
    let taps = sample_multitap(1, 1, 4, 0.5, &mut rng)?;
    let h: Vec<Complex64> = frequency_response(&taps, n)?.iter().map(|m| m.get(0, 0)).collect();
    let kernel: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let fit = emulate_ofdm_kernel(&kernel, &h, 10.0)?;
    println!("scale {:.4}, unreachable subcarriers {:?}", fit.scale_applied, fit.unreachable);

    let layer = OfdmConvLayer::new(CTensor::from_complex(n, 1, &fit.per_sub_weight)?, CTensor::from_complex(n, 1, &h)?)?;
    let x: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let y = ofdm_conv_forward(&layer, &x)?;
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let direct: Complex64 = (0..kernel.len()).map(|j| kernel[j] * x[(t + n - j) % n]).sum::<Complex64>() * fit.scale_applied;
        worst = worst.max((y.get(t, 0) - direct).norm());
    }
    println!("max deviation from scaled circular convolution: {worst:.2e}");
    Ok(())
}
