//! Receiver noise accumulating through a chain of relays: the closed form
//! against simulation, and the deepest chain that keeps a target SNR.

use wpnn::harness::noise_sweep::{compare, gain_chain};
use wpnn::noisemodel::{depth_bound, NoiseNorm};

fn main() -> wpnn::Result<()> {
    println!("{:>5} {:>3} {:>12} {:>12}", "gain", "L", "predicted", "simulated");
    for gain in [0.8, 1.0, 1.25] {
        for depth in [1, 4, 8] {
            let chain = gain_chain(depth, 4, gain, 1e-2)?;
            let (p, mc) = compare(&chain, 20_000, NoiseNorm::Frobenius, depth as u64)?;
            println!("{gain:>5} {depth:>3} {p:>12.4e} {mc:>12.4e}");
        }
    }
    for gain in [0.9, 1.0, 1.1] {
        let l = depth_bound(&[gain], &[1e-2], 10.0, 4.0, 4)?;
        let shown = if l == wpnn::noisemodel::UNBOUNDED_DEPTH { "unbounded".to_string() } else { l.to_string() };
        println!("gain {gain}: deepest chain at 10 dB output SNR is {shown}");
    }
    Ok(())
}
