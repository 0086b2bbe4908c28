//! The `wpnn` command line and custom layer-list experiments.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use super::config::{ChannelModel, ExperimentConfig, ExperimentKind, LayerSpec, TrainingMode};
use super::fig3::emulate_network;
use super::{run_experiment, MetricsRecord, Outcome};
use crate::channel::{sample_rayleigh, ChannelRealization, NoiseSpec};
use crate::data::ImageDataset;
use crate::diffcore::gradcheck::run_suite;
use crate::error::{Error, Result};
use crate::phylayers::{PhysicalLayer, Readout, RelayHop, TransceiverLayer, WpnnModel};
use crate::rng::{complex_gaussian_matrix, stream, substream};
use crate::training::{config_hash, evaluate, save_checkpoint, train_ist_spsa, train_pat, ChannelResample, Checkpoint, Evaluation, PatConfig};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Gradient checks must agree to this relative error.
pub const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "wpnn", version, about = "Simulate, train and emulate wireless physical neural networks")]
pub struct Cli {
    /// TOML experiment file; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Train on the 20k-image subset.
    #[arg(long, global = true)]
    pub subset: bool,
    /// Fashion-MNIST directory (else $WPNN_DATA_DIR, else data/fashion-mnist).
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the configured network and write metrics plus a checkpoint.
    Train,
    /// Fit a trained digital network onto the configured channels.
    Emulate,
    /// Regenerate one of the case-study figures.
    Reproduce { figure: Figure },
    /// Predicted against simulated noise power versus depth.
    NoiseSweep,
    /// Finite-difference check of every differentiable operation.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    match &cli.command {
        Command::Reproduce { figure: Figure::Fig3 } => cfg.experiment = ExperimentKind::Fig3Relay,
        Command::Reproduce { figure: Figure::Fig4 } => cfg.experiment = ExperimentKind::Fig4RisCnn,
        Command::NoiseSweep => cfg.experiment = ExperimentKind::NoiseSweep,
        Command::Train => cfg.experiment = ExperimentKind::Custom,
        Command::Emulate => {
            cfg.experiment = ExperimentKind::Custom;
            cfg.training.mode = TrainingMode::Emulation;
        }
        Command::Gradcheck { .. } => {}
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if cli.subset {
        cfg.data.subset = true;
    }
    if let Some(d) = &cli.data_dir {
        cfg.data.dir = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let mut log = |s: &str| eprintln!("{s}");
    if let Command::Gradcheck { instances } = cli.command {
        let report = run_suite(instances, cfg.seed)?;
        for op in &report.ops {
            println!("{:<18} {:>4} instances  max rel err {:.3e}", op.name, op.instances, op.max_rel_err);
        }
        println!("max relative error {:.3e} over {} operations", report.max_rel_err(), report.ops.len());
        let bad = report.failures(GRADCHECK_TOL);
        if !bad.is_empty() {
            let names: Vec<&str> = bad.iter().map(|o| o.name.as_str()).collect();
            return Err(Error::Contract(format!("gradient check above {GRADCHECK_TOL:e}: {}", names.join(", "))));
        }
        return Ok(());
    }
    let (path, outcome) = run_experiment(&cfg, &mut log)?;
    let n = match outcome {
        Outcome::Metrics(rows) => rows.len(),
        Outcome::Noise(rows) => rows.len(),
    };
    println!("wrote {n} rows to {}", path.display());
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wpnn: {e}");
            if matches!(e, Error::Config(_)) {
                EXIT_CONFIG
            } else {
                EXIT_FAILURE
            }
        }
    }
}

/// The configured layer list, or encoder, `relays[0]` relays and receiver
/// at the configured antenna count when the list is empty.
pub fn layer_list(cfg: &ExperimentConfig) -> Result<Vec<LayerSpec>> {
    let a = &cfg.architecture;
    let layers = if a.layers.is_empty() {
        let m = a.relays.first().copied().unwrap_or(1);
        let mut l = vec![LayerSpec::Encoder { width: a.antennas }];
        l.extend((0..m).map(|_| LayerSpec::Relay { width: a.antennas, activation: None }));
        l.push(LayerSpec::Receiver);
        l
    } else {
        a.layers.clone()
    };
    let last = layers.len() - 1;
    for (i, l) in layers.iter().enumerate() {
        let ok = match l {
            LayerSpec::Encoder { width } => i == 0 && *width > 0,
            LayerSpec::Relay { width, .. } => i > 0 && i < last && *width > 0,
            LayerSpec::Receiver => i == last && i > 0,
        };
        if !ok {
            return Err(Error::Config(format!("layer {i} ({l:?}): expected an encoder, then relays, then a receiver")));
        }
    }
    Ok(layers)
}

/// One square link in front of every layer after the encoder.
pub fn custom_channels(layers: &[LayerSpec], cfg: &ExperimentConfig) -> Result<Vec<ChannelRealization>> {
    let mut width = 0;
    let mut out = Vec::new();
    for (l, spec) in layers.iter().enumerate() {
        if l > 0 {
            let mut rng = substream(cfg.seed, "custom-channels", l as u64);
            out.push(match cfg.channel.model {
                ChannelModel::Rayleigh => sample_rayleigh(width, width, &mut rng)?.with_pathloss(cfg.channel.pathloss.unwrap_or(1.0 / width as f64))?,
                ChannelModel::Identity => ChannelRealization::identity(width),
            });
        }
        if let LayerSpec::Encoder { width: w } | LayerSpec::Relay { width: w, .. } = spec {
            width = *w;
        }
    }
    Ok(out)
}

/// Builds the network of a layer list. Without `channels` it is the
/// noiseless, uncapped digital counterpart.
pub fn build_network(layers: &[LayerSpec], cfg: &ExperimentConfig, input_dim: usize, channels: Option<&[ChannelRealization]>, init_seed: u64) -> Result<WpnnModel> {
    let a = &cfg.architecture;
    let physical = channels.is_some();
    let noise = if physical { cfg.noise() } else { NoiseSpec::NONE };
    let mut rng = stream(init_seed, "custom-init");
    let mut width = input_dim;
    let mut built: Vec<PhysicalLayer> = Vec::with_capacity(layers.len());
    for spec in layers {
        match *spec {
            LayerSpec::Encoder { width: w } => {
                let mut enc = TransceiverLayer::new(Some(complex_gaussian_matrix(&mut rng, w, width, 1.0 / width as f64)), None);
                enc.normalize_tx = true;
                enc.p_max = Some(w as f64);
                if a.tx_pa {
                    enc.tx_activation = a.activation;
                }
                built.push(enc.into());
                width = w;
            }
            LayerSpec::Relay { width: w, activation } => {
                let mut hop = RelayHop::new(complex_gaussian_matrix(&mut rng, w, width, 1.0 / width as f64), activation.unwrap_or(a.activation));
                hop.noise = noise;
                hop.power_cap = if physical { a.power_cap } else { None };
                built.push(hop.into());
                width = w;
            }
            LayerSpec::Receiver => {
                let mut rx = TransceiverLayer::new(None, Some(complex_gaussian_matrix(&mut rng, a.classes, width, 1.0 / width as f64)));
                rx.noise = noise;
                built.push(rx.into());
            }
        }
    }
    let mut model = WpnnModel::new(built, Readout::real_part(a.classes));
    if let Some(ch) = channels {
        if ch.len() + 1 != model.depth() {
            return Err(Error::Contract(format!("{} links for {} layers", ch.len(), model.depth())));
        }
        for (l, c) in ch.iter().enumerate() {
            model.channels[l + 1] = Some(c.clone());
        }
    }
    model.project_constraints();
    Ok(model)
}

fn mode_label(mode: TrainingMode) -> &'static str {
    match mode {
        TrainingMode::Pat => "pat",
        TrainingMode::Spsa => "spsa",
        TrainingMode::Emulation => "emulation",
    }
}

/// Trains the configured layer list with the configured mode, evaluates it
/// with receiver noise and saves the weights to `<output>/custom.ckpt.json`.
pub fn run_custom(cfg: &ExperimentConfig, train: &ImageDataset, test: &ImageDataset, log: &mut dyn FnMut(&str)) -> Result<Vec<MetricsRecord>> {
    let t0 = Instant::now();
    let layers = layer_list(cfg)?;
    let channels = custom_channels(&layers, cfg)?;
    let init_seed: u64 = stream(cfg.seed, "custom-init-seed").random();
    let mut pat = cfg.training.pat.clone();
    pat.seed = stream(cfg.seed, "custom-train").random();
    let dim = train.dim();

    let model = match cfg.training.mode {
        TrainingMode::Pat => {
            let mut model = build_network(&layers, cfg, dim, Some(&channels), init_seed)?;
            train_pat(&mut model, train, None, &pat)?;
            model
        }
        TrainingMode::Spsa => {
            let mut model = build_network(&layers, cfg, dim, Some(&channels), init_seed)?;
            // in-situ: loss read off noisy forward passes on a fixed probe set
            let probe = train.take(train.len().min(512));
            let mut noise = stream(cfg.seed, "custom-spsa-noise");
            let mut spsa = cfg.training.spsa.clone();
            spsa.seed = pat.seed;
            let trace = train_ist_spsa(&mut model, &spsa, &mut |m| Ok(evaluate(m, &probe, 512, Some(&mut noise))?.loss))?;
            log(&format!("spsa: {} loss measurements", trace.evaluations));
            model
        }
        TrainingMode::Emulation => {
            let mut digital = build_network(&layers, cfg, dim, None, init_seed)?;
            let quiet = PatConfig { noise_during_training: false, channel_resample: ChannelResample::Fixed, ..pat };
            train_pat(&mut digital, train, None, &quiet)?;
            let ideal = evaluate(&digital, test, 1000, None)?;
            log(&format!("digital accuracy {:.4}", ideal.accuracy));
            emulate_network(&digital, &channels, cfg)?.0
        }
    };
    let ev: Evaluation = evaluate(&model, test, 1000, Some(&mut stream(cfg.seed, "custom-eval")))?;
    let relays = layers.iter().filter(|l| matches!(l, LayerSpec::Relay { .. })).count();
    let label = mode_label(cfg.training.mode);
    let seconds = t0.elapsed().as_secs_f64();
    log(&format!("{label}: {relays} relays, accuracy {:.4} loss {:.4} ({seconds:.1}s)", ev.accuracy, ev.loss));

    std::fs::create_dir_all(&cfg.output)?;
    save_checkpoint(&cfg.output.join("custom.ckpt.json"), &Checkpoint::of_model(&model, &config_hash(&cfg.to_toml())))?;
    Ok(vec![MetricsRecord::new("M", relays as f64, label, ev, cfg.seed, seconds)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli_main(["wpnn", "frobnicate"]), EXIT_USAGE);
        assert_eq!(cli_main(["wpnn", "train", "--seed", "x"]), EXIT_USAGE);
        assert_eq!(cli_main(["wpnn", "reproduce", "fig9"]), EXIT_USAGE);
    }

    #[test]
    fn config_errors_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "seed = 1\nbogus = 2\n").unwrap();
        assert_eq!(cli_main(["wpnn".into(), "noise-sweep".into(), "--config".into(), p.into_os_string()]), EXIT_CONFIG);
    }

    #[test]
    fn layer_lists_are_validated() {
        let mut cfg = ExperimentConfig::default();
        cfg.architecture.relays = vec![2];
        assert_eq!(layer_list(&cfg).unwrap().len(), 4);
        cfg.architecture.layers = vec![LayerSpec::Receiver, LayerSpec::Encoder { width: 4 }];
        assert!(matches!(layer_list(&cfg), Err(Error::Config(_))));
        cfg.architecture.layers = vec![LayerSpec::Encoder { width: 4 }, LayerSpec::Relay { width: 6, activation: None }, LayerSpec::Receiver];
        let layers = layer_list(&cfg).unwrap();
        let ch = custom_channels(&layers, &cfg).unwrap();
        assert_eq!(ch.iter().map(|c| c.n_tx()).collect::<Vec<_>>(), vec![4, 6]);
        let m = build_network(&layers, &cfg, 5, Some(&ch), 1).unwrap();
        assert_eq!(m.depth(), 3);
    }
}
