//! Closed-form against Monte Carlo output noise power as chains deepen.

use std::fmt::Write as _;

use rand::Rng;

use super::config::ExperimentConfig;
use crate::channel::{ChannelRealization, NoiseSpec};
use crate::diffcore::CTensor;
use crate::error::Result;
use crate::noisemodel::{monte_carlo_noise_power, noise_chain, predicted_noise_power_with, random_linear_chain, NoiseNorm};
use crate::phylayers::{Readout, RelayHop, WpnnModel};
use crate::rng::{stream, substream};

pub const NOISE_CSV_HEADER: &str = "chain,L,predicted,mc,rel_err,seed";

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRow {
    /// `random` or `gain_<g>`.
    pub chain: String,
    pub depth: usize,
    pub predicted: f64,
    pub mc: f64,
    pub rel_err: f64,
}

/// `depth` hops whose links are `gain · I` with noise after each link and
/// unit relay gains, i.e. noise injected after every weight `gain · I`.
pub fn gain_chain(depth: usize, dim: usize, gain: f64, sigma2: f64) -> Result<WpnnModel> {
    let noise = NoiseSpec::from_sigma2(sigma2)?;
    let mut layers = Vec::with_capacity(depth);
    let mut channels = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut hop = RelayHop::new(CTensor::identity(dim), crate::activation::ActivationModel::Linear);
        hop.noise = noise;
        layers.push(hop.into());
        channels.push(Some(ChannelRealization::new(CTensor::identity(dim).scaled(gain), 1.0)?));
    }
    Ok(WpnnModel { layers, channels, readout: Readout::real_part(dim) })
}

/// Predicted and simulated noise power of one chain.
pub fn compare(model: &WpnnModel, trials: usize, norm: NoiseNorm, seed: u64) -> Result<(f64, f64)> {
    let (w, s) = noise_chain(model)?;
    let predicted = predicted_noise_power_with(&w, &s, norm)?.total;
    let mc = monte_carlo_noise_power(model, trials, &mut stream(seed, "noise-mc"))?;
    Ok((predicted, mc))
}

pub fn run_noise_sweep(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Vec<NoiseRow>> {
    let ns = &cfg.noise_sweep;
    let mut rows = Vec::new();
    for (i, &gain) in ns.layer_norms.iter().enumerate() {
        for depth in 1..=ns.max_depth {
            let salt = (i * 1000 + depth) as u64;
            let (label, model) = if gain == 0.0 {
                let mut rng = substream(cfg.seed, "noise-chain", salt);
                ("random".to_string(), random_linear_chain(depth, ns.dim, ns.sigma2, &mut rng)?)
            } else {
                (format!("gain_{gain}"), gain_chain(depth, ns.dim, gain, ns.sigma2)?)
            };
            let (predicted, mc) = compare(&model, ns.trials, ns.norm, substream(cfg.seed, "noise-seed", salt).random())?;
            let rel_err = if predicted > 0.0 { (mc - predicted).abs() / predicted } else { mc.abs() };
            log(&format!("{label:>10} L={depth:<2} predicted {predicted:.6e} mc {mc:.6e} rel {rel_err:.4}"));
            rows.push(NoiseRow { chain: label, depth, predicted, mc, rel_err });
        }
    }
    Ok(rows)
}

pub fn noise_csv(rows: &[NoiseRow], seed: u64) -> String {
    let mut s = String::from(NOISE_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{:.9e},{:.9e},{:.6},{seed}", r.chain, r.depth, r.predicted, r.mc, r.rel_err);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_chain_is_l_d_sigma2() {
        for depth in 1..5 {
            let m = gain_chain(depth, 3, 1.0, 0.1).unwrap();
            let (p, _) = compare(&m, 10, NoiseNorm::Frobenius, 1).unwrap();
            assert!((p - depth as f64 * 3.0 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_two_depth_four() {
        let m = gain_chain(4, 1, 2.0, 1.0).unwrap();
        let (p, mc) = compare(&m, 100_000, NoiseNorm::Frobenius, 2).unwrap();
        assert!((p - 85.0).abs() < 1e-9, "{p}");
        assert!((mc - p).abs() / p < 0.02, "{mc}");
    }
}
