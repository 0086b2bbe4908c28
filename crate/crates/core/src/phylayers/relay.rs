use super::{apply_channel, cap_frobenius, FwdCtx};
use crate::activation::{apply_activation_var, ActivationModel};
use crate::channel::{ChannelRealization, NoiseSpec};
use crate::diffcore::{cmatmul, CTensor, CVar, Matrix, Tape, Unary};
use crate::error::Result;

/// Amplify-and-forward relay: `y = PA(s · G (H x + n))`.
///
/// Noise enters at the relay receiver, before the gain. `s ≤ 1` scales the
/// amplified batch so its mean per-sample power stays within `power_cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelayHop {
    pub gain: CTensor,
    pub activation: ActivationModel,
    pub noise: NoiseSpec,
    pub power_cap: Option<f64>,
    pub trainable: bool,
}

impl RelayHop {
    pub fn new(gain: CTensor, activation: ActivationModel) -> Self {
        Self { gain, activation, noise: NoiseSpec::NONE, power_cap: None, trainable: true }
    }

    pub fn effective_weight(&self, channel: Option<&ChannelRealization>) -> Result<CTensor> {
        match channel {
            Some(ch) => cmatmul(&self.gain, &ch.effective()),
            None => Ok(self.gain.clone()),
        }
    }

    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar, channel: Option<&ChannelRealization>) -> Result<CVar> {
        let r = apply_channel(t, x, channel)?;
        let r = ctx.add_noise(t, r, &self.noise)?;
        let g = ctx.bind_c(t, &self.gain, self.trainable);
        let mut u = t.cmatmul(g, r)?;
        if let Some(cap) = self.power_cap {
            let p = t.col_power(u)?;
            let mean = t.mean(p);
            let s = t.unary(mean, Unary::CapGain(cap));
            u = t.cmul_scalar(u, s)?;
        }
        apply_activation_var(t, u, &self.activation)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        if self.trainable {
            vec![&mut self.gain.re, &mut self.gain.im]
        } else {
            Vec::new()
        }
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        if self.trainable {
            vec![("gain.re".to_string(), &self.gain.re), ("gain.im".to_string(), &self.gain.im)]
        } else {
            Vec::new()
        }
    }

    /// `‖G‖_F² ≤ power_cap`: the output power for white input of unit
    /// per-entry power. The forward pass enforces the cap on the actual batch.
    pub fn project_constraints(&mut self) {
        if let Some(cap) = self.power_cap {
            cap_frobenius(&mut self.gain, cap);
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.power_cap.is_none_or(|cap| self.gain.norm_sq() <= cap * (1.0 + tol))
    }
}
