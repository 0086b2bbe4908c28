use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pat::{argmax_hits, Evaluation, History};
use super::{train_pat, Batches, ChannelResample, EpochRecord, PatConfig};
use crate::activation::ActivationModel;
use crate::data::batch_iter;
use crate::diffcore::{Adam, Im2Col, Matrix, Tape, Unary, Var};
use crate::error::{Error, Result};
use crate::phylayers::{Readout, RelayHop, TransceiverLayer, WpnnModel};
use crate::rng::{complex_gaussian_matrix, gaussian_matrix, stream, substream};

/// Image rows are averaged in groups of four into this many bands.
pub const BANDS: usize = 7;
/// Samples per band after zero padding; one per subcarrier.
pub const BAND_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DigitalArch {
    FcStack { depth: usize },
    CnnSmall,
}

/// Fully connected stack: a transmit encoder normalizing each sample to
/// power `width` (unit power per antenna), `depth` relay hops of size
/// `width`, and a receive combiner onto the classes. No channels, no noise.
pub fn fc_stack_model(depth: usize, input_dim: usize, width: usize, classes: usize, activation: ActivationModel, seed: u64) -> Result<WpnnModel> {
    if depth == 0 {
        return Err(Error::Contract("a stack needs at least one hidden layer".into()));
    }
    activation.validate()?;
    let mut rng = stream(seed, "fc-init");
    let mut enc = TransceiverLayer::new(Some(complex_gaussian_matrix(&mut rng, width, input_dim, 1.0 / input_dim as f64)), None);
    enc.normalize_tx = true;
    enc.p_max = Some(width as f64);
    let mut layers = vec![enc.into()];
    for _ in 0..depth {
        layers.push(RelayHop::new(complex_gaussian_matrix(&mut rng, width, width, 1.0 / width as f64), activation).into());
    }
    layers.push(TransceiverLayer::new(None, Some(complex_gaussian_matrix(&mut rng, classes, width, 1.0 / width as f64))).into());
    Ok(WpnnModel::new(layers, Readout::real_part(classes)))
}

/// Two relay hops, `2 → 4 → 2`, over ideal links.
pub fn xor_relay_model(activation: ActivationModel, seed: u64) -> WpnnModel {
    let mut rng = stream(seed, "xor-init");
    let g1 = complex_gaussian_matrix(&mut rng, 4, 2, 1.0);
    let g2 = complex_gaussian_matrix(&mut rng, 2, 4, 0.5);
    WpnnModel::new(vec![RelayHop::new(g1, activation).into(), RelayHop::new(g2, activation).into()], Readout::real_part(2))
}

/// Band-averaged images: `(rows·cols) × B` in, `1 × (BAND_LEN·BANDS·B)` out
/// with band `q` of sample `b` in column block `b·BANDS + q`.
pub fn image_bands(x: &Matrix, rows: usize, cols: usize) -> Result<Matrix> {
    if x.rows() != rows * cols || rows != BANDS * 4 || cols > BAND_LEN {
        return Err(Error::Shape(format!("band view needs {}×≤{BAND_LEN} images, got {} pixels as {rows}×{cols}", BANDS * 4, x.rows())));
    }
    let b = x.cols();
    let mut out = Matrix::zeros(1, BAND_LEN * BANDS * b);
    let data = out.as_mut_slice();
    for s in 0..b {
        for q in 0..BANDS {
            for c in 0..cols {
                let v: f64 = (0..4).map(|r| x.get((4 * q + r) * cols + c, s)).sum();
                data[(s * BANDS + q) * BAND_LEN + c] = v / 4.0;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub channels: usize,
    pub kernel: usize,
    pub classes: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self { channels: 32, kernel: 3, classes: 10 }
    }
}

/// Small 1-D circular CNN over image bands: conv 1→C, ReLU, conv C→C,
/// ReLU, per-band average pooling, linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    pub cfg: CnnConfig,
    pub image_rows: usize,
    pub image_cols: usize,
    /// `C × K`.
    pub stem: Matrix,
    pub stem_bias: Matrix,
    /// `C × (C·K)`; kernel `(o, i)` tap `j` is `conv[o, i·K + j]`.
    pub conv: Matrix,
    pub conv_bias: Matrix,
    /// `classes × (C·BANDS)`.
    pub fc: Matrix,
    pub fc_bias: Matrix,
}

impl CnnModel {
    pub fn new(cfg: CnnConfig, image_rows: usize, image_cols: usize, seed: u64) -> Self {
        let (c, k) = (cfg.channels, cfg.kernel);
        let mut rng = stream(seed, "cnn-init");
        Self {
            cfg,
            image_rows,
            image_cols,
            stem: gaussian_matrix(&mut rng, c, k, (2.0 / k as f64).sqrt()),
            stem_bias: Matrix::zeros(c, 1),
            conv: gaussian_matrix(&mut rng, c, c * k, (2.0 / (c * k) as f64).sqrt()),
            conv_bias: Matrix::zeros(c, 1),
            fc: gaussian_matrix(&mut rng, cfg.classes, c * BANDS, (1.0 / (c * BANDS) as f64).sqrt()),
            fc_bias: Matrix::zeros(cfg.classes, 1),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.stem, &mut self.stem_bias, &mut self.conv, &mut self.conv_bias, &mut self.fc, &mut self.fc_bias]
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        [("stem", &self.stem), ("stem_bias", &self.stem_bias), ("conv", &self.conv), ("conv_bias", &self.conv_bias), ("fc", &self.fc), ("fc_bias", &self.fc_bias)]
            .into_iter()
            .map(|(n, m)| (n.to_string(), m))
            .collect()
    }

    /// Taps of the kernel from input channel `i` to output channel `o`.
    pub fn kernel(&self, o: usize, i: usize) -> Vec<f64> {
        let k = self.cfg.kernel;
        (0..k).map(|j| self.conv.get(o, i * k + j)).collect()
    }

    fn spec(&self, channels: usize) -> Im2Col {
        Im2Col { channels, len: BAND_LEN, kernel: self.cfg.kernel }
    }

    fn stem_var(&self, t: &mut Tape, x: &Matrix, p: &[Var]) -> Result<Var> {
        let xb = t.constant(image_bands(x, self.image_rows, self.image_cols)?);
        let cols = t.im2col(xb, self.spec(1))?;
        let h = t.matmul(p[0], cols)?;
        let h = t.add_col(h, p[1])?;
        Ok(t.unary(h, Unary::Relu))
    }

    fn head_var(&self, t: &mut Tape, conv_out: Var, p: &[Var]) -> Result<Var> {
        let h = t.add_col(conv_out, p[3])?;
        let h = t.unary(h, Unary::Relu);
        let pooled = t.group_mean_cols(h, BAND_LEN)?;
        let feats = t.fold(pooled, BANDS)?;
        let z = t.matmul(p[4], feats)?;
        t.add_col(z, p[5])
    }

    fn bind(&self, t: &mut Tape, track: bool) -> Vec<Var> {
        [&self.stem, &self.stem_bias, &self.conv, &self.conv_bias, &self.fc, &self.fc_bias]
            .into_iter()
            .map(|m| if track { t.param(m.clone()) } else { t.constant(m.clone()) })
            .collect()
    }

    /// Logits and the parameter leaves, in `params_mut` order.
    pub fn record(&self, t: &mut Tape, x: &Matrix, track: bool) -> Result<(Var, Vec<Var>)> {
        let p = self.bind(t, track);
        let h = self.stem_var(t, x, &p)?;
        let cols = t.im2col(h, self.spec(self.cfg.channels))?;
        let conv = t.matmul(p[2], cols)?;
        Ok((self.head_var(t, conv, &p)?, p))
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let mut t = Tape::new();
        let (l, _) = self.record(&mut t, x, false)?;
        Ok(t.value(l).clone())
    }

    /// Input of the second convolution: `C × (BAND_LEN·BANDS·B)`.
    pub fn stem_features(&self, x: &Matrix) -> Result<Matrix> {
        let mut t = Tape::new();
        let p = self.bind(&mut t, false);
        let h = self.stem_var(&mut t, x, &p)?;
        Ok(t.value(h).clone())
    }

    /// Logits from an externally computed second convolution (before bias).
    pub fn head(&self, conv_out: &Matrix) -> Result<Matrix> {
        let mut t = Tape::new();
        let p = self.bind(&mut t, false);
        let c = t.constant(conv_out.clone());
        let l = self.head_var(&mut t, c, &p)?;
        Ok(t.value(l).clone())
    }

    pub fn evaluate(&self, set: &dyn Batches, batch_size: usize) -> Result<Evaluation> {
        evaluate_logits(set, batch_size, |x| self.logits(x))
    }
}

/// Accuracy and cross-entropy of an arbitrary logit function.
pub(crate) fn evaluate_logits(set: &dyn Batches, batch_size: usize, mut logits: impl FnMut(&Matrix) -> Result<Matrix>) -> Result<Evaluation> {
    let n = set.len();
    if n == 0 {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    let (mut correct, mut loss) = (0usize, 0.0);
    for idx in batch_iter(n, batch_size, None, 0)? {
        let (x, y) = set.batch(&idx);
        let l = logits(&x)?;
        correct += argmax_hits(&l, &y);
        let mut t = Tape::new();
        let lv = t.constant(l);
        let xe = t.softmax_xent(lv, &y)?;
        loss += t.value(xe).item() * idx.len() as f64;
    }
    Ok(Evaluation { accuracy: correct as f64 / n as f64, loss: loss / n as f64 })
}

/// Adam on softmax cross-entropy, with the same batching and seeding as
/// physics-aware training.
pub fn train_cnn(model: &mut CnnModel, train: &dyn Batches, eval: Option<&dyn Batches>, cfg: &PatConfig) -> Result<History> {
    cfg.validate()?;
    let mut history = History::default();
    let mut adam = Adam::new(cfg.lr);
    for epoch in 0..cfg.epochs {
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for idx in batch_iter(train.len(), cfg.batch_size, Some(cfg.seed), epoch as u64)? {
            let (x, y) = train.batch(&idx);
            let mut t = Tape::new();
            let (logits, params) = model.record(&mut t, &x, true)?;
            let loss = t.softmax_xent(logits, &y)?;
            let lv = t.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: history.step_losses.len(), layer: 2 });
            }
            let mut grads = t.backward(loss)?;
            let g: Vec<Matrix> = params.iter().map(|&v| grads.take(v).unwrap_or_else(|| Matrix::zeros(t.shape(v).0, t.shape(v).1))).collect();
            adam.step(&mut model.params_mut(), &g)?;
            history.step_losses.push(lv);
            loss_sum += lv * idx.len() as f64;
            seen += idx.len();
        }
        let eval = eval.map(|set| model.evaluate(set, 1000)).transpose()?;
        history.epochs.push(EpochRecord { epoch, train_loss: loss_sum / seen.max(1) as f64, eval });
    }
    Ok(history)
}

/// A trained noiseless, channel-free network.
#[derive(Clone, Debug)]
pub enum DigitalReference {
    Fc { model: WpnnModel, history: History },
    Cnn { model: CnnModel, history: History },
}

impl DigitalReference {
    pub fn history(&self) -> &History {
        match self {
            Self::Fc { history, .. } | Self::Cnn { history, .. } => history,
        }
    }
}

/// Trains the digital reference ("upper bound") network. The FC stack uses
/// width 32 with the Rapp curve, so its hidden weights are directly the
/// targets the relays emulate; input images must be 28×28.
pub fn digital_reference(arch: DigitalArch, train: &dyn Batches, eval: Option<&dyn Batches>, cfg: &PatConfig) -> Result<DigitalReference> {
    let cfg = PatConfig { noise_during_training: false, channel_resample: ChannelResample::Fixed, csi_error_var: 0.0, ..cfg.clone() };
    match arch {
        DigitalArch::FcStack { depth } => {
            let mut model = fc_stack_model(depth, 784, 32, 10, ActivationModel::RAPP_DEFAULT, substream(cfg.seed, "reference", depth as u64).random())?;
            let history = train_pat(&mut model, train, eval, &cfg)?;
            Ok(DigitalReference::Fc { model, history })
        }
        DigitalArch::CnnSmall => {
            let mut model = CnnModel::new(CnnConfig::default(), 28, 28, cfg.seed);
            let history = train_cnn(&mut model, train, eval, &cfg)?;
            Ok(DigitalReference::Cnn { model, history })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::Samples;

    #[test]
    fn depth_zero_is_rejected() {
        assert!(fc_stack_model(0, 4, 4, 2, ActivationModel::Linear, 0).is_err());
        let s = Samples::xor();
        assert!(digital_reference(DigitalArch::FcStack { depth: 0 }, &s, None, &PatConfig::default()).is_err());
    }

    #[test]
    fn bands_average_rows() {
        let x = Matrix::from_fn(784, 2, |p, s| (p / 28) as f64 + s as f64 * 100.0);
        let b = image_bands(&x, 28, 28).unwrap();
        assert_eq!(b.cols(), BAND_LEN * BANDS * 2);
        // band 2 of sample 1: rows 8..12, mean 9.5 + 100
        assert_eq!(b.get(0, (BANDS + 2) * BAND_LEN + 5), 109.5);
        assert_eq!(b.get(0, (BANDS + 2) * BAND_LEN + 30), 0.0);
    }

    #[test]
    fn cnn_head_matches_full_forward() {
        let m = CnnModel::new(CnnConfig { channels: 4, kernel: 3, classes: 3 }, 28, 28, 1);
        let x = gaussian_matrix(&mut stream(2, "x"), 784, 2, 1.0);
        let stem = m.stem_features(&x).unwrap();
        // circular convolution by hand
        let n = stem.cols();
        let conv = Matrix::from_fn(4, n, |o, col| {
            let (blk, t) = (col / BAND_LEN, col % BAND_LEN);
            (0..4)
                .map(|i| m.kernel(o, i).iter().enumerate().map(|(j, kj)| kj * stem.get(i, blk * BAND_LEN + (t + BAND_LEN - j) % BAND_LEN)).sum::<f64>())
                .sum()
        });
        let a = m.head(&conv).unwrap();
        let b = m.logits(&x).unwrap();
        assert!(a.zip_map(&b, |p, q| (p - q).abs()).max_abs() < 1e-10);
    }

    #[test]
    fn reference_is_deterministic() {
        let s = Samples { x: gaussian_matrix(&mut stream(3, "x"), 784, 6, 1.0), labels: vec![0, 1, 2, 3, 4, 5] };
        let cfg = PatConfig { epochs: 2, batch_size: 3, lr: 1e-3, ..PatConfig::default() };
        let a = digital_reference(DigitalArch::FcStack { depth: 1 }, &s, None, &cfg).unwrap();
        let b = digital_reference(DigitalArch::FcStack { depth: 1 }, &s, None, &cfg).unwrap();
        match (a, b) {
            (DigitalReference::Fc { model: ma, .. }, DigitalReference::Fc { model: mb, .. }) => assert_eq!(ma, mb),
            _ => unreachable!(),
        }
    }
}
