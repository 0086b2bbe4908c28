use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{FwdCtx, PhysicalLayer};
use crate::activation::Modulus;
use crate::channel::ChannelRealization;
use crate::diffcore::{cmatmul, CTensor, CVar, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// How the final complex signal becomes real class scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutRule {
    #[default]
    RealPart,
    Magnitude,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    pub rule: ReadoutRule,
    /// `classes × 1`.
    pub bias: Matrix,
    pub trainable: bool,
    /// Logits are multiplied by this (emulation scale compensation).
    pub gain: f64,
}

impl Readout {
    pub fn real_part(classes: usize) -> Self {
        Self { rule: ReadoutRule::RealPart, bias: Matrix::zeros(classes, 1), trainable: true, gain: 1.0 }
    }
}

/// Ordered physical layers, the channel each one sees, and the readout.
#[derive(Clone, Debug, PartialEq)]
pub struct WpnnModel {
    pub layers: Vec<PhysicalLayer>,
    pub channels: Vec<Option<ChannelRealization>>,
    pub readout: Readout,
}

/// Output of a recorded forward pass.
pub struct Recorded {
    pub logits: Var,
    /// Tracked parameter leaves, in [`WpnnModel::params_mut`] order.
    pub params: Vec<Var>,
    /// Output of every layer, for locating the first non-finite signal.
    pub layer_outputs: Vec<CVar>,
}

impl WpnnModel {
    pub fn new(layers: Vec<PhysicalLayer>, readout: Readout) -> Self {
        let channels = vec![None; layers.len()];
        Self { layers, channels, readout }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn check(&self) -> Result<()> {
        if self.channels.len() != self.layers.len() {
            return Err(Error::Contract(format!("{} channels for {} layers", self.channels.len(), self.layers.len())));
        }
        Ok(())
    }

    /// Records the whole network on `t`. `noise = None` disables noise.
    pub fn record(&self, t: &mut Tape, x: &CTensor, noise: Option<&mut Stream>, track: bool) -> Result<Recorded> {
        self.check()?;
        let mut ctx = FwdCtx::new(noise, track);
        let mut h = t.cconst(x);
        let mut outs = Vec::with_capacity(self.layers.len());
        for (layer, ch) in self.layers.iter().zip(&self.channels) {
            h = layer.forward(t, &mut ctx, h, ch.as_ref())?;
            outs.push(h);
        }
        let score = match self.readout.rule {
            ReadoutRule::RealPart => h.re,
            ReadoutRule::Magnitude => t.radial(h.re, h.im, Rc::new(Modulus))?,
        };
        let (classes, _) = t.shape(score);
        if self.readout.bias.shape() != (classes, 1) {
            return Err(Error::Shape(format!("readout bias {:?} for {classes} outputs", self.readout.bias.shape())));
        }
        let score = if self.readout.gain != 1.0 { t.scale(score, self.readout.gain) } else { score };
        let b = ctx.bind(t, &self.readout.bias, self.readout.trainable);
        let logits = t.add_col(score, b)?;
        Ok(Recorded { logits, params: ctx.into_params(), layer_outputs: outs })
    }

    /// Every trainable tensor, layer by layer, then the readout bias.
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        if self.readout.trainable {
            v.push(&mut self.readout.bias);
        }
        v
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (n, m) in l.named_params() {
                v.push((format!("layer{i}.{}.{n}", l.name()), m));
            }
        }
        if self.readout.trainable {
            v.push(("readout.bias".to_string(), &self.readout.bias));
        }
        v
    }

    pub fn project_constraints(&mut self) {
        for l in &mut self.layers {
            l.project_constraints();
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.layers.iter().all(|l| l.is_feasible(tol))
    }

    /// Product of the layers' effective weights, last layer first.
    pub fn collapsed_weight(&self) -> Result<CTensor> {
        self.check()?;
        let mut w: Option<CTensor> = None;
        for (l, ch) in self.layers.iter().zip(&self.channels) {
            let we = l.effective_weight(ch.as_ref())?;
            w = Some(match w {
                Some(acc) => cmatmul(&we, &acc)?,
                None => we,
            });
        }
        w.ok_or_else(|| Error::Contract("model without layers".into()))
    }

    /// Replaces the PA model of every relay, and of transmitters too when
    /// `include_tx` is set.
    pub fn set_activation(&mut self, model: crate::activation::ActivationModel, include_tx: bool) {
        for l in &mut self.layers {
            if matches!(l, PhysicalLayer::RelayHop(_)) || (include_tx && matches!(l, PhysicalLayer::Transceiver(_))) {
                l.set_activation(model);
            }
        }
    }
}

/// Real logits `classes × B` for the inputs `x` (`d × B`).
pub fn forward_network(model: &WpnnModel, x: &CTensor, noise: Option<&mut Stream>) -> Result<Matrix> {
    let mut t = Tape::new();
    let rec = model.record(&mut t, x, noise, false)?;
    Ok(t.value(rec.logits).clone())
}
