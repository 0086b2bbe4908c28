//! Experiment configuration, read from TOML with unknown keys rejected.
//!
//! Every section and field is optional; omitted values take the defaults
//! below, which reproduce the relay and RIS case studies.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activation::ActivationModel;
use crate::channel::NoiseSpec;
use crate::data::{NormMode, SUBSET_TRAIN};
use crate::error::{Error, Result};
use crate::noisemodel::NoiseNorm;
use crate::training::{ChannelResample, PatConfig, SpsaConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Fig3Relay,
    Fig4RisCnn,
    NoiseSweep,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    UpperBound,
    Emulation,
    LinearPa,
    NonlinearPa,
    MismatchedPa,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::UpperBound, Scheme::Emulation, Scheme::LinearPa, Scheme::NonlinearPa, Scheme::MismatchedPa];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::UpperBound => "upper_bound",
            Scheme::Emulation => "emulation",
            Scheme::LinearPa => "linear_pa",
            Scheme::NonlinearPa => "nonlinear_pa",
            Scheme::MismatchedPa => "mismatched_pa",
        }
    }
}

/// How emulated relays absorb the power scaling of their gains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    /// Logits are multiplied by the inverse product of scales.
    #[default]
    Readout,
    /// Each relay amplifier's saturation level follows its scale, so the
    /// scaled chain is exact up to one readout factor.
    ActivationInput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Overrides `WPNN_DATA_DIR` and the default location.
    pub dir: Option<PathBuf>,
    pub subset: bool,
    pub subset_size: usize,
    pub normalization: NormMode,
    /// Truncates the test split (for smoke runs).
    pub test_limit: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { dir: None, subset: false, subset_size: SUBSET_TRAIN, normalization: NormMode::UnitPower, test_limit: None }
    }
}

/// One entry of a custom layer list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Trainable transmitter mapping the input to `width` antennas.
    Encoder { width: usize },
    /// Relay hop with `width` output antennas.
    Relay { width: usize, activation: Option<ActivationModel> },
    /// Receiver combining onto the classes.
    Receiver,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub relays: Vec<usize>,
    pub antennas: usize,
    pub classes: usize,
    pub activation: ActivationModel,
    /// Per-hop transmit power budget; `None` disables the relay cap.
    pub power_cap: Option<f64>,
    /// Amplifier at the transmitter as well as at every relay.
    pub tx_pa: bool,
    pub schemes: Vec<Scheme>,
    pub compensation: Compensation,
    /// Custom experiments: explicit layer list.
    pub layers: Vec<LayerSpec>,
    pub ris_elements: Vec<usize>,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub subcarriers: usize,
    pub channel_taps: usize,
    /// Transmit power per subcarrier, in dB relative to the noise floor.
    pub p_max_db: Vec<f64>,
    pub ris_sweeps: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            relays: vec![1, 2, 3, 4, 5],
            antennas: 32,
            classes: 10,
            // deep enough into saturation that the amplifier shapes the decision
            activation: ActivationModel::Rapp { a_sat: 0.25, p: 2.0 },
            power_cap: Some(32.0),
            tx_pa: true,
            schemes: Scheme::ALL.to_vec(),
            compensation: Compensation::Readout,
            layers: Vec::new(),
            ris_elements: vec![40, 100],
            tx_antennas: 9,
            rx_antennas: 64,
            subcarriers: 32,
            channel_taps: 4,
            p_max_db: vec![-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0],
            ris_sweeps: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    #[default]
    Rayleigh,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    /// Receive SNR per antenna for unit signal power; ignored when `sigma2`
    /// is given.
    pub snr_db: f64,
    pub sigma2: Option<f64>,
    /// Large-scale gain; defaults to one over the transmit antenna count on
    /// relay links and to `fig4::DEFAULT_RIS_PATHLOSS` on each RIS link.
    pub pathloss: Option<f64>,
    pub csi_error_var: f64,
    /// Exponential power-delay decay per tap (frequency-selective links).
    pub tap_decay: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { model: ChannelModel::Rayleigh, snr_db: 30.0, sigma2: None, pathloss: None, csi_error_var: 0.0, tap_decay: 1.0 }
    }
}

impl ChannelConfig {
    pub fn noise(&self) -> Result<NoiseSpec> {
        match self.sigma2 {
            Some(s) => NoiseSpec::from_sigma2(s),
            None => Ok(NoiseSpec::from_snr_db(self.snr_db)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    #[default]
    Pat,
    Spsa,
    Emulation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub mode: TrainingMode,
    pub pat: PatConfig,
    pub spsa: SpsaConfig,
    /// Training of the digital CNN reference.
    pub cnn: PatConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            mode: TrainingMode::Pat,
            pat: PatConfig { channel_resample: ChannelResample::Fixed, ..PatConfig::default() },
            spsa: SpsaConfig::default(),
            cnn: PatConfig { epochs: 10, channel_resample: ChannelResample::Fixed, noise_during_training: false, ..PatConfig::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub max_depth: usize,
    pub dim: usize,
    pub sigma2: f64,
    /// Per-layer Frobenius norms to sweep; `0` means random linear layers.
    pub layer_norms: Vec<f64>,
    pub trials: usize,
    pub norm: NoiseNorm,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self { max_depth: 8, dim: 4, sigma2: 1e-2, layer_norms: vec![0.0, 1.0, 2.0], trials: 100_000, norm: NoiseNorm::Frobenius }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Output directory.
    pub output: PathBuf,
    pub data: DataConfig,
    pub architecture: ArchitectureConfig,
    pub channel: ChannelConfig,
    pub training: TrainingConfig,
    pub noise_sweep: NoiseSweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Fig3Relay,
            seed: 0,
            output: PathBuf::from("results"),
            data: DataConfig::default(),
            architecture: ArchitectureConfig::default(),
            channel: ChannelConfig::default(),
            training: TrainingConfig::default(),
            noise_sweep: NoiseSweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        Self { experiment: kind, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.architecture;
        a.activation.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.training.pat.validate()?;
        self.training.cnn.validate()?;
        self.training.spsa.validate()?;
        self.channel.noise().map_err(|e| Error::Config(e.to_string()))?;
        if a.antennas == 0 || a.classes < 2 {
            return Err(Error::Config("architecture needs antennas ≥ 1 and classes ≥ 2".into()));
        }
        if a.relays.contains(&0) {
            return Err(Error::Config("relay counts must be at least 1".into()));
        }
        if a.power_cap.is_some_and(|p| !(p > 0.0)) {
            return Err(Error::Config("power_cap must be positive".into()));
        }
        if self.data.subset_size == 0 {
            return Err(Error::Config("subset_size must be at least 1".into()));
        }
        if self.noise_sweep.trials == 0 || self.noise_sweep.dim == 0 {
            return Err(Error::Config("noise sweep needs trials ≥ 1 and dim ≥ 1".into()));
        }
        Ok(())
    }

    /// Receive-side noise of every hop.
    pub fn noise(&self) -> NoiseSpec {
        self.channel.noise().expect("validated")
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
