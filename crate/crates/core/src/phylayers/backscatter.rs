use num_complex::Complex64;

use super::FwdCtx;
use crate::channel::NoiseSpec;
use crate::diffcore::{CTensor, CVar, Matrix, Tape};
use crate::error::{Error, Result};

/// Passive tags reflecting one incident signal: the receiver sees
/// `(Σ_k h_rx,k Γ_k h_tx,k + direct) · x + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackscatterField {
    /// Reflection coefficients, `m × 1`.
    pub gamma: CTensor,
    pub h_tx: CTensor,
    pub h_rx: CTensor,
    pub direct: Complex64,
    pub noise: NoiseSpec,
    pub trainable: bool,
}

impl BackscatterField {
    pub fn new(gamma: CTensor, h_tx: CTensor, h_rx: CTensor, direct: Complex64) -> Result<Self> {
        let m = gamma.rows();
        for (name, v) in [("gamma", &gamma), ("h_tx", &h_tx), ("h_rx", &h_rx)] {
            if v.shape() != (m, 1) {
                return Err(Error::Shape(format!("{name} must be {m}×1, got {:?}", v.shape())));
            }
        }
        Ok(Self { gamma, h_tx, h_rx, direct, noise: NoiseSpec::NONE, trainable: true })
    }

    pub fn effective_gain(&self) -> Complex64 {
        (0..self.gamma.rows()).map(|k| self.h_rx.get(k, 0) * self.gamma.get(k, 0) * self.h_tx.get(k, 0)).sum::<Complex64>() + self.direct
    }

    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar) -> Result<CVar> {
        // w = h_rxᵀ (Γ ⊙ h_tx) + direct, kept on the tape for Γ gradients
        let g = ctx.bind_c(t, &self.gamma, self.trainable);
        let htx = t.cconst(&self.h_tx);
        let hrx_t = t.cconst(&CTensor::new(self.h_rx.re.transpose(), self.h_rx.im.transpose())?);
        let reflected = t.cmul(g, htx)?;
        let w = t.cmatmul(hrx_t, reflected)?;
        let d = t.cconst(&CTensor::from_complex(1, 1, &[self.direct])?);
        let w = t.cadd(w, d)?;
        // scalar complex gain times every entry: re = wr·xr − wi·xi, im = wr·xi + wi·xr
        let rr = t.mul_scalar(x.re, w.re)?;
        let ii = t.mul_scalar(x.im, w.im)?;
        let ri = t.mul_scalar(x.im, w.re)?;
        let ir = t.mul_scalar(x.re, w.im)?;
        let y = CVar { re: t.sub(rr, ii)?, im: t.add(ri, ir)? };
        ctx.add_noise(t, y, &self.noise)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        if self.trainable {
            vec![&mut self.gamma.re, &mut self.gamma.im]
        } else {
            Vec::new()
        }
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        if self.trainable {
            vec![("gamma.re".to_string(), &self.gamma.re), ("gamma.im".to_string(), &self.gamma.im)]
        } else {
            Vec::new()
        }
    }

    /// `|Γ_k| ≤ 1`, phase preserved.
    pub fn project_constraints(&mut self) {
        for k in 0..self.gamma.rows() {
            let z = self.gamma.get(k, 0);
            if z.norm() > 1.0 + 1e-14 {
                self.gamma.set(k, 0, z / z.norm());
            }
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.gamma.to_complex_vec().iter().all(|z| z.norm() <= 1.0 + tol)
    }
}
