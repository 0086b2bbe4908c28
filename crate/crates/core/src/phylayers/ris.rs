use num_complex::Complex64;

use super::FwdCtx;
use crate::channel::NoiseSpec;
use crate::diffcore::{cmatmul, CTensor, CVar, Matrix, Tape, Unary};
use crate::error::{Error, Result};

/// One metasurface: element responses `amp_k e^{iθ_k}` followed by
/// propagation `prop` to the next surface (or the receiver).
#[derive(Clone, Debug, PartialEq)]
pub struct RisLayer {
    /// Phases, `n × 1`, radians.
    pub theta: Matrix,
    /// Amplitudes, `n × 1`; identically 1 on a passive surface.
    pub amp: Matrix,
    /// `n_next × n`.
    pub prop: CTensor,
}

impl RisLayer {
    pub fn passive(theta: Matrix, prop: CTensor) -> Result<Self> {
        let n = theta.rows();
        if theta.cols() != 1 || prop.cols() != n {
            return Err(Error::Shape(format!("phases {:?} do not match propagation {:?}", theta.shape(), prop.shape())));
        }
        Ok(Self { amp: Matrix::filled(n, 1, 1.0), theta, prop })
    }

    pub fn n_elems(&self) -> usize {
        self.theta.rows()
    }

    /// `diag(amp e^{iθ})` as an `n × 1` column.
    pub fn response(&self) -> CTensor {
        CTensor::from_fn(self.n_elems(), 1, |k, _| Complex64::from_polar(self.amp.get(k, 0), self.theta.get(k, 0)))
    }
}

/// Stacked intelligent metasurface between a fixed precoder and combiner:
/// `y = C (P_L Φ_L ⋯ P_1 Φ_1 F x + n)`.
///
/// Phases are trainable, and amplitudes too on an active surface.
#[derive(Clone, Debug, PartialEq)]
pub struct RisSimStack {
    pub precoder: Option<CTensor>,
    pub layers: Vec<RisLayer>,
    pub combiner: Option<CTensor>,
    pub active: bool,
    pub amp_max: f64,
    pub noise: NoiseSpec,
    pub trainable: bool,
}

impl RisSimStack {
    pub fn passive(precoder: Option<CTensor>, layers: Vec<RisLayer>, combiner: Option<CTensor>) -> Result<Self> {
        let s = Self { precoder, layers, combiner, active: false, amp_max: 1.0, noise: NoiseSpec::NONE, trainable: true };
        s.effective_weight()?;
        Ok(s)
    }

    pub fn effective_weight(&self) -> Result<CTensor> {
        let first = self.layers.first().ok_or_else(|| Error::Shape("RIS stack without layers".into()))?;
        let mut w = match &self.precoder {
            Some(f) => f.clone(),
            None => CTensor::identity(first.n_elems()),
        };
        for l in &self.layers {
            if w.rows() != l.n_elems() {
                return Err(Error::Shape(format!("{} signals reach a surface of {} elements", w.rows(), l.n_elems())));
            }
            let d = l.response();
            let (r, c) = w.shape();
            let scaled = CTensor::from_fn(r, c, |i, j| d.get(i, 0) * w.get(i, j));
            w = cmatmul(&l.prop, &scaled)?;
        }
        match &self.combiner {
            Some(c) => cmatmul(c, &w),
            None => Ok(w),
        }
    }

    pub fn forward(&self, t: &mut Tape, ctx: &mut FwdCtx, x: CVar) -> Result<CVar> {
        let mut z = match &self.precoder {
            Some(f) => {
                let fv = t.cconst(f);
                t.cmatmul(fv, x)?
            }
            None => x,
        };
        for l in &self.layers {
            let theta = ctx.bind(t, &l.theta, self.trainable);
            let amp = ctx.bind(t, &l.amp, self.trainable && self.active);
            let c = t.unary(theta, Unary::Cos);
            let s = t.unary(theta, Unary::Sin);
            let d = CVar { re: t.mul(amp, c)?, im: t.mul(amp, s)? };
            let z_phased = t.cmul_col(z, d)?;
            let p = t.cconst(&l.prop);
            z = t.cmatmul(p, z_phased)?;
        }
        let z = ctx.add_noise(t, z, &self.noise)?;
        match &self.combiner {
            Some(c) => {
                let cv = t.cconst(c);
                t.cmatmul(cv, z)
            }
            None => Ok(z),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = Vec::new();
        if !self.trainable {
            return v;
        }
        for l in &mut self.layers {
            v.push(&mut l.theta);
            if self.active {
                v.push(&mut l.amp);
            }
        }
        v
    }

    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = Vec::new();
        if !self.trainable {
            return v;
        }
        for (i, l) in self.layers.iter().enumerate() {
            v.push((format!("surface{i}.theta"), &l.theta));
            if self.active {
                v.push((format!("surface{i}.amp"), &l.amp));
            }
        }
        v
    }

    /// Passive: amplitudes snap to 1. Active: amplitudes clip to
    /// `[0, amp_max]`. Phases are untouched.
    pub fn project_constraints(&mut self) {
        for l in &mut self.layers {
            let amp = &mut l.amp;
            for a in amp.as_mut_slice() {
                *a = if self.active { a.clamp(0.0, self.amp_max) } else { 1.0 };
            }
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.layers.iter().all(|l| {
            l.amp.as_slice().iter().all(|&a| if self.active { (-tol..=self.amp_max + tol).contains(&a) } else { (a - 1.0).abs() <= tol })
        })
    }
}

/// Single-surface link per subcarrier: `H_k(θ) = D_k + R_k diag(e^{iθ}) G_k`
/// with `R_k` (`n_rx × N`), `G_k` (`N × n_tx`) and optional direct path.
pub fn ris_channel(r: &CTensor, theta: &[f64], g: &CTensor, direct: Option<&CTensor>) -> Result<CTensor> {
    if r.cols() != theta.len() || g.rows() != theta.len() {
        return Err(Error::Shape(format!("{} phases for {:?}·{:?}", theta.len(), r.shape(), g.shape())));
    }
    let (n, tx) = g.shape();
    let phased = CTensor::from_fn(n, tx, |i, j| Complex64::from_polar(1.0, theta[i]) * g.get(i, j));
    let h = cmatmul(r, &phased)?;
    match direct {
        Some(d) => h.add(d),
        None => Ok(h),
    }
}

/// Phases maximizing the total channel gain `Σ_k ‖H_k(θ)‖_F²` over all
/// subcarriers, by closed-form coordinate ascent.
///
/// With the other elements fixed, `Σ_k ‖B_k + e^{iθ_n} r_n g_nᵀ‖²` is
/// `const + 2 Re(e^{iθ_n} c_n)` with `c_n = Σ_k Σ_ij conj(B_k,ij) r_i g_j`,
/// so the optimum is `θ_n = −arg c_n`. Each update never decreases the
/// objective.
pub fn optimize_ris_phases(r: &[CTensor], g: &[CTensor], direct: Option<&[CTensor]>, sweeps: usize) -> Result<Vec<f64>> {
    if r.len() != g.len() || r.is_empty() {
        return Err(Error::Shape("need one R_k and G_k per subcarrier".into()));
    }
    let n = r[0].cols();
    let mut theta = vec![0.0; n];
    let mut h: Vec<CTensor> = (0..r.len())
        .map(|k| ris_channel(&r[k], &theta, &g[k], direct.map(|d| &d[k])))
        .collect::<Result<_>>()?;
    let (rx, tx) = h[0].shape();
    for _ in 0..sweeps {
        for e in 0..n {
            let mut c = Complex64::new(0.0, 0.0);
            let old = Complex64::from_polar(1.0, theta[e]);
            for k in 0..r.len() {
                for i in 0..rx {
                    let ri = r[k].get(i, e);
                    for j in 0..tx {
                        let a = ri * g[k].get(e, j);
                        let b = h[k].get(i, j) - old * a;
                        c += b.conj() * a;
                    }
                }
            }
            let new_theta = if c.norm() > 0.0 { -c.arg() } else { theta[e] };
            let delta = Complex64::from_polar(1.0, new_theta) - old;
            for k in 0..r.len() {
                for i in 0..rx {
                    let ri = r[k].get(i, e);
                    for j in 0..tx {
                        let z = h[k].get(i, j) + delta * ri * g[k].get(e, j);
                        h[k].set(i, j, z);
                    }
                }
            }
            theta[e] = new_theta;
        }
    }
    Ok(theta)
}
