use serde::{Deserialize, Serialize};

use super::Batches;
use crate::channel::{corrupt_csi, sample_rayleigh, ChannelRealization};
use crate::data::batch_iter;
use crate::diffcore::{Adam, CTensor, Matrix, Tape};
use crate::error::{Error, Result};
use crate::phylayers::{Recorded, WpnnModel};
use crate::rng::{stream, substream, Stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelResample {
    #[default]
    PerBatch,
    PerEpoch,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub channel_resample: ChannelResample,
    pub noise_during_training: bool,
    /// The twin trains on channels perturbed by this much CSI error.
    pub csi_error_var: f64,
    pub seed: u64,
}

impl Default for PatConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 128,
            lr: 1e-3,
            channel_resample: ChannelResample::PerBatch,
            noise_during_training: true,
            csi_error_var: 0.0,
            seed: 0,
        }
    }
}

impl PatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.csi_error_var >= 0.0 && self.csi_error_var.is_finite()) {
            return Err(Error::Config(format!("csi_error_var must be nonnegative, got {}", self.csi_error_var)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval: Option<Evaluation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Loss of every optimizer step, before its update.
    pub step_losses: Vec<f64>,
}

impl History {
    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Passed to the observer after each step's update and projection.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

/// Fresh Rayleigh draws for every channel of the model, keeping shapes and
/// path loss.
pub fn resample_channels(channels: &[Option<ChannelRealization>], rng: &mut Stream) -> Result<Vec<Option<ChannelRealization>>> {
    channels
        .iter()
        .map(|ch| match ch {
            None => Ok(None),
            Some(c) => {
                let mut fresh = sample_rayleigh(c.n_rx(), c.n_tx(), rng)?.with_pathloss(c.pathloss)?;
                fresh.coherence_id = c.coherence_id + 1;
                Ok(Some(fresh))
            }
        })
        .collect()
}

fn twin_channels(truth: &[Option<ChannelRealization>], var: f64, rng: &mut Stream) -> Result<Vec<Option<ChannelRealization>>> {
    if var == 0.0 {
        return Ok(truth.to_vec());
    }
    truth.iter().map(|ch| ch.as_ref().map(|c| corrupt_csi(c, var, rng).map(|e| e.as_realization())).transpose()).collect()
}

/// Classification accuracy and mean cross-entropy in chunks of `batch_size`.
pub fn evaluate(model: &WpnnModel, set: &dyn Batches, batch_size: usize, mut noise: Option<&mut Stream>) -> Result<Evaluation> {
    let n = set.len();
    if n == 0 {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    let (mut correct, mut loss) = (0usize, 0.0);
    for idx in batch_iter(n, batch_size, None, 0)? {
        let (x, y) = set.batch(&idx);
        let mut t = Tape::new();
        let rec = model.record(&mut t, &CTensor::from_real(x), noise.as_deref_mut(), false)?;
        let l = t.softmax_xent(rec.logits, &y)?;
        loss += t.value(l).item() * idx.len() as f64;
        correct += argmax_hits(t.value(rec.logits), &y);
    }
    Ok(Evaluation { accuracy: correct as f64 / n as f64, loss: loss / n as f64 })
}

/// Samples whose largest logit (first on ties) is the label.
pub(crate) fn argmax_hits(logits: &Matrix, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(j, &y)| {
            let best = (0..logits.rows()).fold(0, |b, i| if logits.get(i, j) > logits.get(b, j) { i } else { b });
            best == y
        })
        .count()
}

fn first_non_finite(t: &Tape, rec: &Recorded) -> usize {
    rec.layer_outputs.iter().position(|o| !t.value(o.re).is_finite() || !t.value(o.im).is_finite()).unwrap_or(rec.layer_outputs.len())
}

/// Physics-aware training; see [`train_pat_observed`].
pub fn train_pat(model: &mut WpnnModel, train: &dyn Batches, eval: Option<&dyn Batches>, cfg: &PatConfig) -> Result<History> {
    train_pat_observed(model, train, eval, cfg, &mut |_, _| {})
}

/// Trains the model's digital twin by backpropagation: each step draws or
/// reuses channels, runs the noisy forward pass, takes an Adam step on the
/// softmax cross-entropy and projects every layer back onto its
/// constraints. The model keeps the true channels of the last draw.
pub fn train_pat_observed(
    model: &mut WpnnModel,
    train: &dyn Batches,
    eval: Option<&dyn Batches>,
    cfg: &PatConfig,
    observer: &mut dyn FnMut(&StepInfo, &WpnnModel),
) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let mut history = History::default();
    let mut adam = Adam::new(cfg.lr);
    let mut chan_rng = stream(cfg.seed, "pat-channel");
    let mut csi_rng = stream(cfg.seed, "pat-csi");
    let mut truth = model.channels.clone();
    let mut twin = twin_channels(&truth, cfg.csi_error_var, &mut csi_rng)?;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        if epoch > 0 && cfg.channel_resample == ChannelResample::PerEpoch {
            truth = resample_channels(&truth, &mut chan_rng)?;
            twin = twin_channels(&truth, cfg.csi_error_var, &mut csi_rng)?;
        }
        let mut noise_rng = substream(cfg.seed, "pat-noise", epoch as u64);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for idx in batch_iter(train.len(), cfg.batch_size, Some(cfg.seed), epoch as u64)? {
            if step > 0 && cfg.channel_resample == ChannelResample::PerBatch {
                truth = resample_channels(&truth, &mut chan_rng)?;
                twin = twin_channels(&truth, cfg.csi_error_var, &mut csi_rng)?;
            }
            model.channels.clone_from(&twin);
            let (x, y) = train.batch(&idx);
            let mut t = Tape::new();
            let noise = cfg.noise_during_training.then_some(&mut noise_rng);
            let recorded = model.record(&mut t, &CTensor::from_real(x), noise, true);
            let outcome = recorded.and_then(|rec| {
                let loss = t.softmax_xent(rec.logits, &y)?;
                let lv = t.value(loss).item();
                if !lv.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step, layer: first_non_finite(&t, &rec) });
                }
                let mut grads = t.backward(loss)?;
                let g: Vec<Matrix> = rec
                    .params
                    .iter()
                    .map(|&v| grads.take(v).unwrap_or_else(|| Matrix::zeros(t.shape(v).0, t.shape(v).1)))
                    .collect();
                adam.step(&mut model.params_mut(), &g)?;
                Ok(lv)
            });
            model.channels.clone_from(&truth);
            let lv = outcome?;
            model.project_constraints();
            history.step_losses.push(lv);
            observer(&StepInfo { epoch, step, loss: lv }, model);
            loss_sum += lv * idx.len() as f64;
            seen += idx.len();
            step += 1;
        }
        let eval = match eval {
            Some(set) => {
                let mut rng = substream(cfg.seed, "eval-noise", epoch as u64);
                Some(evaluate(model, set, 1000, Some(&mut rng))?)
            }
            None => None,
        };
        history.epochs.push(EpochRecord { epoch, train_loss: loss_sum / seen as f64, eval });
    }
    Ok(history)
}
