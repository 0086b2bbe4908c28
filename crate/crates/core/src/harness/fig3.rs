//! Classification accuracy of a multi-hop relay network against the number
//! of relays, for matched, linear and mismatched amplifiers, digital
//! training and emulation of the digital weights.

use std::time::Instant;

use rand::Rng;

use super::config::{ChannelModel, Compensation, ExperimentConfig, Scheme};
use super::MetricsRecord;
use crate::activation::ActivationModel;
use crate::channel::{sample_rayleigh, ChannelRealization, NoiseSpec};
use crate::data::ImageDataset;
use crate::error::{Error, Result};
use crate::phylayers::{PhysicalLayer, Readout, RelayHop, TransceiverLayer, WpnnModel};
use crate::rng::{complex_gaussian_matrix, stream, substream};
use crate::training::{emulate_fc, evaluate, train_pat, ChannelResample, Evaluation, PatConfig};

const EVAL_BATCH: usize = 1000;

/// `m + 1` links: one into each relay and one into the receiver.
pub fn relay_channels(m: usize, cfg: &ExperimentConfig) -> Result<Vec<ChannelRealization>> {
    let n = cfg.architecture.antennas;
    let pathloss = cfg.channel.pathloss.unwrap_or(1.0 / n as f64);
    let mut rng = substream(cfg.seed, "fig3-channels", m as u64);
    (0..=m)
        .map(|_| match cfg.channel.model {
            ChannelModel::Rayleigh => sample_rayleigh(n, n, &mut rng)?.with_pathloss(pathloss),
            ChannelModel::Identity => Ok(ChannelRealization::identity(n)),
        })
        .collect()
}

/// Encoder, `m` relay hops and a receiver. With `channels = None` the
/// network is the ideal digital counterpart: no links, no noise, no power
/// cap. Initial weights depend only on `init_seed` and the shapes.
pub fn relay_network(m: usize, cfg: &ExperimentConfig, input_dim: usize, activation: ActivationModel, channels: Option<&[ChannelRealization]>, init_seed: u64) -> Result<WpnnModel> {
    let a = &cfg.architecture;
    let n = a.antennas;
    if let Some(ch) = channels {
        if ch.len() != m + 1 {
            return Err(Error::Contract(format!("{} links for {m} relays", ch.len())));
        }
    }
    let physical = channels.is_some();
    let noise = if physical { cfg.noise() } else { NoiseSpec::NONE };
    let mut rng = stream(init_seed, "relay-init");

    let mut enc = TransceiverLayer::new(Some(complex_gaussian_matrix(&mut rng, n, input_dim, 1.0 / input_dim as f64)), None);
    enc.normalize_tx = true;
    enc.p_max = Some(n as f64);
    if a.tx_pa {
        enc.tx_activation = activation;
    }
    let mut layers: Vec<PhysicalLayer> = vec![enc.into()];
    for _ in 0..m {
        let mut hop = RelayHop::new(complex_gaussian_matrix(&mut rng, n, n, 1.0 / n as f64), activation);
        hop.noise = noise;
        hop.power_cap = if physical { a.power_cap } else { None };
        layers.push(hop.into());
    }
    let mut rx = TransceiverLayer::new(None, Some(complex_gaussian_matrix(&mut rng, a.classes, n, 1.0 / n as f64)));
    rx.noise = noise;
    layers.push(rx.into());

    let mut model = WpnnModel::new(layers, Readout::real_part(a.classes));
    if let Some(ch) = channels {
        for (l, c) in ch.iter().enumerate() {
            model.channels[l + 1] = Some(c.clone());
        }
    }
    model.project_constraints();
    Ok(model)
}

/// Fits every hop of a physical network to the weights of its trained
/// digital counterpart. Relay gains are scaled into the power cap and the
/// scales compensated per `compensation`.
pub fn emulate_network(digital: &WpnnModel, channels: &[ChannelRealization], cfg: &ExperimentConfig) -> Result<(WpnnModel, Vec<f64>)> {
    let mut model = digital.clone();
    let m = model.depth() - 2;
    if channels.len() != m + 1 {
        return Err(Error::Contract(format!("{} links for {m} relays", channels.len())));
    }
    let noise = cfg.noise();
    let cap = cfg.architecture.power_cap.unwrap_or(f64::INFINITY);
    let mut scales = Vec::with_capacity(m);
    let mut cumulative = 1.0;
    for (l, ch) in channels.iter().enumerate() {
        model.channels[l + 1] = Some(ch.clone());
        match &mut model.layers[l + 1] {
            PhysicalLayer::RelayHop(hop) => {
                let fit = emulate_fc(&hop.gain, ch, cap)?;
                hop.gain = fit.fitted;
                hop.noise = noise;
                hop.power_cap = None;
                cumulative *= fit.scale_applied;
                scales.push(fit.scale_applied);
                if cfg.architecture.compensation == Compensation::ActivationInput {
                    if let ActivationModel::Rapp { a_sat, p } = hop.activation {
                        hop.activation = ActivationModel::Rapp { a_sat: a_sat * cumulative, p };
                    }
                }
            }
            PhysicalLayer::Transceiver(rx) => {
                let c = rx.combiner.as_ref().ok_or_else(|| Error::Contract("receiver without combiner".into()))?;
                rx.combiner = Some(emulate_fc(c, ch, f64::INFINITY)?.fitted);
                rx.noise = noise;
            }
            other => return Err(Error::Contract(format!("cannot emulate a {} hop", other.name()))),
        }
    }
    model.readout.gain = 1.0 / cumulative;
    Ok((model, scales))
}

fn train_cfg(cfg: &ExperimentConfig, salt: u64) -> PatConfig {
    let mut pat = cfg.training.pat.clone();
    pat.seed = substream(cfg.seed, "fig3-train", salt).random();
    pat
}

fn eval_noisy(model: &WpnnModel, test: &ImageDataset, cfg: &ExperimentConfig, m: usize) -> Result<Evaluation> {
    let mut rng = substream(cfg.seed, "fig3-eval", m as u64);
    evaluate(model, test, EVAL_BATCH, Some(&mut rng))
}

/// One row per (relay count, scheme); all schemes at one relay count share
/// the channel draw, the initial weights and the evaluation noise.
pub fn run_fig3(cfg: &ExperimentConfig, train: &ImageDataset, test: &ImageDataset, log: &mut dyn FnMut(&str)) -> Result<Vec<MetricsRecord>> {
    let a = &cfg.architecture;
    let dim = train.dim();
    let mut rows = Vec::new();
    let wants = |s: Scheme| a.schemes.contains(&s);
    for &m in &a.relays {
        let channels = relay_channels(m, cfg)?;
        let init_seed: u64 = substream(cfg.seed, "fig3-init", m as u64).random();
        let mut push = |scheme: Scheme, ev: Evaluation, started: Instant| {
            let seconds = started.elapsed().as_secs_f64();
            log(&format!("M={m} {:<13} accuracy {:.4} loss {:.4} ({seconds:.1}s)", scheme.label(), ev.accuracy, ev.loss));
            rows.push(MetricsRecord::new("M", m as f64, scheme.label(), ev, cfg.seed, seconds));
        };

        if wants(Scheme::UpperBound) || wants(Scheme::Emulation) {
            let t0 = Instant::now();
            let mut digital = relay_network(m, cfg, dim, a.activation, None, init_seed)?;
            let pat = PatConfig { noise_during_training: false, channel_resample: ChannelResample::Fixed, ..train_cfg(cfg, 3 * m as u64) };
            train_pat(&mut digital, train, None, &pat)?;
            if wants(Scheme::UpperBound) {
                push(Scheme::UpperBound, evaluate(&digital, test, EVAL_BATCH, None)?, t0);
            }
            if wants(Scheme::Emulation) {
                let t1 = Instant::now();
                let (emulated, _) = emulate_network(&digital, &channels, cfg)?;
                push(Scheme::Emulation, eval_noisy(&emulated, test, cfg, m)?, t1);
            }
        }
        if wants(Scheme::LinearPa) || wants(Scheme::MismatchedPa) {
            let t0 = Instant::now();
            let mut linear = relay_network(m, cfg, dim, ActivationModel::Linear, Some(&channels), init_seed)?;
            train_pat(&mut linear, train, None, &train_cfg(cfg, 3 * m as u64 + 1))?;
            if wants(Scheme::LinearPa) {
                push(Scheme::LinearPa, eval_noisy(&linear, test, cfg, m)?, t0);
            }
            if wants(Scheme::MismatchedPa) {
                let t1 = Instant::now();
                let mut swapped = linear.clone();
                swapped.set_activation(a.activation, a.tx_pa);
                push(Scheme::MismatchedPa, eval_noisy(&swapped, test, cfg, m)?, t1);
            }
        }
        if wants(Scheme::NonlinearPa) {
            let t0 = Instant::now();
            let mut model = relay_network(m, cfg, dim, a.activation, Some(&channels), init_seed)?;
            train_pat(&mut model, train, None, &train_cfg(cfg, 3 * m as u64 + 2))?;
            push(Scheme::NonlinearPa, eval_noisy(&model, test, cfg, m)?, t0);
        }
    }
    Ok(rows)
}
