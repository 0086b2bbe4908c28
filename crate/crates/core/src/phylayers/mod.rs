//! Physical layers and the end-to-end network they form.
//!
//! Each layer has an effective-weight view (the linear map it applies when
//! noise and activations are off) and a forward pass recorded on a
//! [`Tape`], so the same code serves inference, physics-aware training and
//! gradient checks.

mod backscatter;
mod model;
mod ofdm;
mod relay;
mod ris;
mod transceiver;

pub use backscatter::BackscatterField;
pub use model::{forward_network, Readout, ReadoutRule, Recorded, WpnnModel};
pub use ofdm::{dft_matrix, idft_matrix, ofdm_conv_forward, OfdmConvLayer};
pub use relay::RelayHop;
pub use ris::{optimize_ris_phases, ris_channel, RisLayer, RisSimStack};
pub use transceiver::TransceiverLayer;

use crate::channel::{ChannelRealization, NoiseSpec};
use crate::diffcore::{CTensor, CVar, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian_matrix, Stream};

/// Any physical layer of a wireless network.
#[derive(Clone, Debug, PartialEq)]
pub enum PhysicalLayer {
    Transceiver(TransceiverLayer),
    RelayHop(RelayHop),
    Backscatter(BackscatterField),
    RisSim(RisSimStack),
    OfdmConv(OfdmConvLayer),
}

/// State threaded through one forward pass.
pub struct FwdCtx<'r> {
    noise: Option<&'r mut Stream>,
    track: bool,
    params: Vec<Var>,
}

impl<'r> FwdCtx<'r> {
    /// `noise = None` forces every noise term to zero; `track` records the
    /// trainable parameters as gradient-tracked leaves.
    pub fn new(noise: Option<&'r mut Stream>, track: bool) -> Self {
        Self { noise, track, params: Vec::new() }
    }

    /// Parameter leaves bound so far, in [`PhysicalLayer::params_mut`] order.
    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Var> {
        self.params
    }

    pub(crate) fn bind(&mut self, t: &mut Tape, m: &Matrix, trainable: bool) -> Var {
        if self.track && trainable {
            let v = t.param(m.clone());
            self.params.push(v);
            v
        } else {
            t.constant(m.clone())
        }
    }

    pub(crate) fn bind_c(&mut self, t: &mut Tape, c: &CTensor, trainable: bool) -> CVar {
        let re = self.bind(t, &c.re, trainable);
        let im = self.bind(t, &c.im, trainable);
        CVar { re, im }
    }

    /// Adds `CN(0, sigma2)` noise to `x` when noise is enabled.
    pub(crate) fn add_noise(&mut self, t: &mut Tape, x: CVar, spec: &NoiseSpec) -> Result<CVar> {
        match self.noise.as_deref_mut() {
            Some(rng) if spec.sigma2 > 0.0 => {
                let (r, c) = t.cshape(x);
                let n = complex_gaussian_matrix(rng, r, c, spec.sigma2);
                let nv = t.cconst(&n);
                t.cadd(x, nv)
            }
            _ => Ok(x),
        }
    }
}

/// Multiplies by an optional channel; `None` is an ideal (identity) link.
pub(crate) fn apply_channel(t: &mut Tape, x: CVar, channel: Option<&ChannelRealization>) -> Result<CVar> {
    match channel {
        None => Ok(x),
        Some(ch) => {
            let (rows, _) = t.cshape(x);
            if ch.n_tx() != rows {
                return Err(Error::Shape(format!("channel expects {} inputs, signal has {rows}", ch.n_tx())));
            }
            let h = t.cconst(&ch.effective());
            t.cmatmul(h, x)
        }
    }
}

/// Rescales `m` so that `‖m‖_F² ≤ cap`; returns the factor applied.
pub(crate) fn cap_frobenius(m: &mut CTensor, cap: f64) -> f64 {
    let p = m.norm_sq();
    // the slack keeps a second projection from rescaling by rounding error
    if p > cap * (1.0 + 1e-12) && p > 0.0 {
        let s = (cap / p).sqrt();
        m.re.scale_in_place(s);
        m.im.scale_in_place(s);
        s
    } else {
        1.0
    }
}

impl PhysicalLayer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Transceiver(_) => "transceiver",
            Self::RelayHop(_) => "relay_hop",
            Self::Backscatter(_) => "backscatter",
            Self::RisSim(_) => "ris_sim",
            Self::OfdmConv(_) => "ofdm_conv",
        }
    }

    /// The linear map applied with noise and activations off.
    pub fn effective_weight(&self, channel: Option<&ChannelRealization>) -> Result<CTensor> {
        match self {
            Self::Transceiver(l) => l.effective_weight(channel),
            Self::RelayHop(l) => l.effective_weight(channel),
            Self::Backscatter(l) => Ok(CTensor::from_complex(1, 1, &[l.effective_gain()])?),
            Self::RisSim(l) => l.effective_weight(),
            Self::OfdmConv(l) => l.effective_weight(),
        }
    }

    /// One layer on the tape.
    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar, channel: Option<&ChannelRealization>) -> Result<CVar> {
        match self {
            Self::Transceiver(l) => l.forward(t, ctx, x, channel),
            Self::RelayHop(l) => l.forward(t, ctx, x, channel),
            Self::Backscatter(l) => l.forward(t, ctx, x),
            Self::RisSim(l) => l.forward(t, ctx, x),
            Self::OfdmConv(l) => l.forward(t, ctx, x),
        }
    }

    /// Value-level forward pass of a single layer.
    pub fn forward_layer(&self, x: &CTensor, channel: Option<&ChannelRealization>, noise: Option<&mut Stream>) -> Result<CTensor> {
        let mut t = Tape::new();
        let mut ctx = FwdCtx::new(noise, false);
        let xv = t.cconst(x);
        let y = self.forward(&mut t, &mut ctx, xv, channel)?;
        Ok(t.cvalue(y))
    }

    /// Trainable tensors in the order the forward pass binds them.
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Self::Transceiver(l) => l.params_mut(),
            Self::RelayHop(l) => l.params_mut(),
            Self::Backscatter(l) => l.params_mut(),
            Self::RisSim(l) => l.params_mut(),
            Self::OfdmConv(l) => l.params_mut(),
        }
    }

    /// Named trainable tensors, same order as [`Self::params_mut`].
    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        match self {
            Self::Transceiver(l) => l.named_params(),
            Self::RelayHop(l) => l.named_params(),
            Self::Backscatter(l) => l.named_params(),
            Self::RisSim(l) => l.named_params(),
            Self::OfdmConv(l) => l.named_params(),
        }
    }

    /// Projects parameters onto the feasible set of the hardware.
    pub fn project_constraints(&mut self) {
        match self {
            Self::Transceiver(l) => l.project_constraints(),
            Self::RelayHop(l) => l.project_constraints(),
            Self::Backscatter(l) => l.project_constraints(),
            Self::RisSim(l) => l.project_constraints(),
            Self::OfdmConv(_) => {}
        }
    }

    /// Whether every invariant of the layer type holds (to `tol`).
    pub fn is_feasible(&self, tol: f64) -> bool {
        match self {
            Self::Transceiver(l) => l.is_feasible(tol),
            Self::RelayHop(l) => l.is_feasible(tol),
            Self::Backscatter(l) => l.is_feasible(tol),
            Self::RisSim(l) => l.is_feasible(tol),
            Self::OfdmConv(_) => true,
        }
    }

    pub fn activation(&self) -> Option<crate::activation::ActivationModel> {
        match self {
            Self::RelayHop(l) => Some(l.activation),
            Self::Transceiver(l) => Some(l.tx_activation),
            _ => None,
        }
    }

    /// Replaces the layer's activation (relay PA or transmit PA).
    pub fn set_activation(&mut self, model: crate::activation::ActivationModel) {
        match self {
            Self::RelayHop(l) => l.activation = model,
            Self::Transceiver(l) => l.tx_activation = model,
            _ => {}
        }
    }
}

impl From<TransceiverLayer> for PhysicalLayer {
    fn from(l: TransceiverLayer) -> Self {
        Self::Transceiver(l)
    }
}

impl From<RelayHop> for PhysicalLayer {
    fn from(l: RelayHop) -> Self {
        Self::RelayHop(l)
    }
}

impl From<BackscatterField> for PhysicalLayer {
    fn from(l: BackscatterField) -> Self {
        Self::Backscatter(l)
    }
}

impl From<RisSimStack> for PhysicalLayer {
    fn from(l: RisSimStack) -> Self {
        Self::RisSim(l)
    }
}

impl From<OfdmConvLayer> for PhysicalLayer {
    fn from(l: OfdmConvLayer) -> Self {
        Self::OfdmConv(l)
    }
}
