//! Least-squares channel estimation from orthogonal pilots: the measured
//! error shrinks as 1/(pilot power × pilot count).

use wpnn::channel::{estimate_csi_ls, sample_rayleigh, NoiseSpec};
use wpnn::rng::stream;

fn main() -> wpnn::Result<()> {
    let mut rng = stream(3, "csi-example");
    let h = sample_rayleigh(8, 4, &mut rng)?;
    let noise = NoiseSpec::from_snr_db(10.0);
    println!("{:>6} {:>7} {:>12} {:>12}", "pilots", "power", "mse", "predicted");
    for n_pilots in [4, 8, 32] {
        for power in [0.1, 1.0, 10.0] {
            let trials = 200;
            let mut mse = 0.0;
            let mut predicted = 0.0;
            for _ in 0..trials {
                let est = estimate_csi_ls(&h, power, n_pilots, &noise, &mut rng)?;
                let err = est.h_hat.sub(&h.effective())?;
                mse += err.norm_sq() / (8.0 * 4.0) / trials as f64;
                predicted = est.error_var;
            }
            println!("{n_pilots:>6} {power:>7} {mse:>12.3e} {predicted:>12.3e}");
        }
    }
    match estimate_csi_ls(&h, 1.0, 2, &noise, &mut rng) {
        Err(e) => println!("two pilots for four antennas: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
