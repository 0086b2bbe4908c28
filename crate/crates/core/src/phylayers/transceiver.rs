use num_complex::Complex64;

use super::{apply_channel, cap_frobenius, FwdCtx};
use crate::activation::{apply_activation_var, ActivationModel};
use crate::channel::{ChannelRealization, NoiseSpec};
use crate::diffcore::{cmatmul, CTensor, CVar, Matrix, Tape, Unary};
use crate::error::{Error, Result};

/// Precoder `F`, channel `H`, combiner `C`: `y = C (H (F x) + n) + bias`.
///
/// A missing precoder or combiner is an identity (the layer is then only a
/// transmitter or only a receiver). With `normalize_tx` every transmitted
/// sample is rescaled to power `p_max` before the transmit amplifier.
#[derive(Clone, Debug, PartialEq)]
pub struct TransceiverLayer {
    pub precoder: Option<CTensor>,
    pub combiner: Option<CTensor>,
    pub bias: Option<Matrix>,
    pub noise: NoiseSpec,
    pub p_max: Option<f64>,
    pub constant_modulus: bool,
    pub normalize_tx: bool,
    pub tx_activation: ActivationModel,
    pub trainable: bool,
}

impl TransceiverLayer {
    pub fn new(precoder: Option<CTensor>, combiner: Option<CTensor>) -> Self {
        Self {
            precoder,
            combiner,
            bias: None,
            noise: NoiseSpec::NONE,
            p_max: None,
            constant_modulus: false,
            normalize_tx: false,
            tx_activation: ActivationModel::Linear,
            trainable: true,
        }
    }

    pub fn effective_weight(&self, channel: Option<&ChannelRealization>) -> Result<CTensor> {
        let mut w: Option<CTensor> = self.precoder.clone();
        if let Some(ch) = channel {
            let h = ch.effective();
            w = Some(match w {
                Some(f) => cmatmul(&h, &f)?,
                None => h,
            });
        }
        if let Some(c) = &self.combiner {
            w = Some(match w {
                Some(m) => cmatmul(c, &m)?,
                None => c.clone(),
            });
        }
        w.ok_or_else(|| Error::Contract("transceiver without precoder, channel or combiner has no fixed dimension".into()))
    }

    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar, channel: Option<&ChannelRealization>) -> Result<CVar> {
        let mut s = match &self.precoder {
            Some(f) => {
                let fv = ctx.bind_c(t, f, self.trainable);
                t.cmatmul(fv, x)?
            }
            None => x,
        };
        if self.normalize_tx {
            let target = self.p_max.unwrap_or(1.0);
            let p = t.col_power(s)?;
            let inv = t.unary(p, Unary::InvSqrt);
            s = t.cmul_row(s, inv)?;
            s = t.cscale(s, target.sqrt());
        }
        s = apply_activation_var(t, s, &self.tx_activation)?;
        let r = apply_channel(t, s, channel)?;
        let r = ctx.add_noise(t, r, &self.noise)?;
        let mut y = match &self.combiner {
            Some(c) => {
                let cv = ctx.bind_c(t, c, self.trainable);
                t.cmatmul(cv, r)?
            }
            None => r,
        };
        if let Some(b) = &self.bias {
            let bv = ctx.bind(t, b, self.trainable);
            y.re = t.add_col(y.re, bv)?;
        }
        Ok(y)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        if !self.trainable {
            return Vec::new();
        }
        let mut v = Vec::new();
        if let Some(f) = &mut self.precoder {
            v.push(&mut f.re);
            v.push(&mut f.im);
        }
        if let Some(c) = &mut self.combiner {
            v.push(&mut c.re);
            v.push(&mut c.im);
        }
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        if !self.trainable {
            return Vec::new();
        }
        let mut v = Vec::new();
        if let Some(f) = &self.precoder {
            v.push(("precoder.re".to_string(), &f.re));
            v.push(("precoder.im".to_string(), &f.im));
        }
        if let Some(c) = &self.combiner {
            v.push(("combiner.re".to_string(), &c.re));
            v.push(("combiner.im".to_string(), &c.im));
        }
        if let Some(b) = &self.bias {
            v.push(("bias".to_string(), b));
        }
        v
    }

    /// Constant modulus `|F_ij| = 1/√n_tx` when required (this fixes the
    /// power), otherwise the cap `‖F‖_F² ≤ p_max`, which is the transmit
    /// power for white input of unit per-entry power.
    pub fn project_constraints(&mut self) {
        let Some(f) = &mut self.precoder else { return };
        if self.constant_modulus {
            let m = 1.0 / (f.rows() as f64).sqrt();
            let (r, c) = f.shape();
            for i in 0..r {
                for j in 0..c {
                    let z = f.get(i, j);
                    if (z.norm() - m).abs() <= 1e-14 * m {
                        continue;
                    }
                    let phase = if z.norm() > 0.0 { z.arg() } else { 0.0 };
                    f.set(i, j, Complex64::from_polar(m, phase));
                }
            }
        } else if let Some(p) = self.p_max {
            cap_frobenius(f, p);
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        let Some(f) = &self.precoder else { return true };
        if !self.constant_modulus {
            return self.p_max.is_none_or(|p| f.norm_sq() <= p * (1.0 + tol));
        }
        let m = 1.0 / (f.rows() as f64).sqrt();
        f.to_complex_vec().iter().all(|z| (z.norm() - m).abs() <= tol)
    }
}
