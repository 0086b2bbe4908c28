//! Emulating a digital relay network over fixed Rayleigh links: exact
//! without noise, and progressively drowned by amplified noise as the SNR
//! drops, because inverting the links costs transmit power.

use wpnn::diffcore::{CTensor, Matrix};
use wpnn::harness::config::Compensation;
use wpnn::harness::fig3::{emulate_network, relay_channels, relay_network};
use wpnn::harness::ExperimentConfig;
use wpnn::phylayers::forward_network;
use wpnn::rng::stream;

fn main() -> wpnn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.architecture.antennas = 8;
    cfg.architecture.power_cap = Some(8.0);
    let (m, dim) = (2, 6);
    let digital = relay_network(m, &cfg, dim, cfg.architecture.activation, None, 1)?;
    let x = CTensor::from_real(Matrix::from_fn(dim, 64, |i, j| ((i * 7 + j * 3) as f64).sin()));
    let want = forward_network(&digital, &x, None)?;
    let rms = |y: &Matrix| (y.zip_map(&want, |a, b| (a - b).powi(2)).sum() / y.len() as f64).sqrt();

    for comp in [Compensation::Readout, Compensation::ActivationInput] {
        cfg.architecture.compensation = comp;
        println!("{comp:?}");
        for snr in [200.0, 60.0, 30.0] {
            cfg.channel.snr_db = snr;
            let channels = relay_channels(m, &cfg)?;
            let (emu, scales) = emulate_network(&digital, &channels, &cfg)?;
            let clean = forward_network(&emu, &x, None)?;
            let noisy = forward_network(&emu, &x, Some(&mut stream(3, "example-noise")))?;
            let scales: Vec<String> = scales.iter().map(|s| format!("{s:.3e}")).collect();
            println!("  {snr:>5} dB  hop scales [{}]  rms error clean {:.2e}  noisy {:.2e}", scales.join(", "), rms(&clean), rms(&noisy));
        }
    }
    Ok(())
}
