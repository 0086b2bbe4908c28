use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phylayers::WpnnModel;
use crate::rng::stream;

/// Gains `a_k = a / (k + 1 + A)^alpha` and perturbation sizes
/// `c_k = c / (k + 1)^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaConfig {
    pub iterations: usize,
    pub a: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub stability: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self { iterations: 1000, a: 0.1, c: 0.1, stability: 50.0, alpha: 0.602, gamma: 0.101, seed: 0 }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("SPSA perturbation c must be positive, got {}", self.c)));
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("SPSA alpha must lie in (0.5, 1], got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(Error::Config(format!("SPSA gamma must lie in (0, 0.5], got {}", self.gamma)));
        }
        if !(self.a > 0.0 && self.a.is_finite() && self.stability >= 0.0) {
            return Err(Error::Config(format!("SPSA needs a > 0 and A ≥ 0, got a={} A={}", self.a, self.stability)));
        }
        Ok(())
    }

    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpsaTrace {
    pub evaluations: usize,
    /// Mean of the two measurements of each iteration.
    pub losses: Vec<f64>,
}

/// Two-measurement gradient estimate at `w` along the ±1 perturbation
/// `delta`. Returns the estimate and the two losses.
pub fn spsa_gradient(w: &[f64], ck: f64, delta: &[f64], loss: &mut dyn FnMut(&[f64]) -> Result<f64>) -> Result<(Vec<f64>, f64, f64)> {
    let plus: Vec<f64> = w.iter().zip(delta).map(|(x, d)| x + ck * d).collect();
    let minus: Vec<f64> = w.iter().zip(delta).map(|(x, d)| x - ck * d).collect();
    let lp = loss(&plus)?;
    let lm = loss(&minus)?;
    let diff = (lp - lm) / (2.0 * ck);
    Ok((delta.iter().map(|d| diff / d).collect(), lp, lm))
}

/// Minimizes `loss` from `w` in place, calling `project` after each update.
pub fn spsa_minimize(
    w: &mut [f64],
    cfg: &SpsaConfig,
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    project: &mut dyn FnMut(&mut [f64]),
) -> Result<SpsaTrace> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, "spsa");
    let mut trace = SpsaTrace::default();
    let mut delta = vec![0.0; w.len()];
    for k in 0..cfg.iterations {
        for d in delta.iter_mut() {
            *d = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let (g, lp, lm) = spsa_gradient(w, cfg.c_k(k), &delta, loss)?;
        trace.evaluations += 2;
        trace.losses.push(0.5 * (lp + lm));
        let ak = cfg.a_k(k);
        for (x, gi) in w.iter_mut().zip(&g) {
            *x -= ak * gi;
        }
        project(w);
    }
    Ok(trace)
}

/// All trainable reals of the model, in `params_mut` order.
pub fn read_params(model: &mut WpnnModel) -> Vec<f64> {
    model.params_mut().iter().flat_map(|m| m.as_slice().to_vec()).collect()
}

pub fn write_params(model: &mut WpnnModel, w: &[f64]) -> Result<()> {
    let mut params = model.params_mut();
    let total: usize = params.iter().map(|m| m.len()).sum();
    if total != w.len() {
        return Err(Error::Shape(format!("{} values for {total} parameters", w.len())));
    }
    let mut at = 0;
    for m in params.iter_mut() {
        let n = m.len();
        m.as_mut_slice().copy_from_slice(&w[at..at + n]);
        at += n;
    }
    Ok(())
}

/// In-situ training: the model is only ever measured through `evaluator`,
/// which returns a scalar loss (for instance a noisy forward pass on a
/// minibatch). Each iteration spends exactly two measurements.
pub fn train_ist_spsa(model: &mut WpnnModel, cfg: &SpsaConfig, evaluator: &mut dyn FnMut(&WpnnModel) -> Result<f64>) -> Result<SpsaTrace> {
    let mut w = read_params(model);
    let mut probe = model.clone();
    let mut deployed = model.clone();
    let trace = spsa_minimize(
        &mut w,
        cfg,
        &mut |p| {
            write_params(&mut probe, p)?;
            evaluator(&probe)
        },
        &mut |p| {
            // constraints live on the structured parameters
            if write_params(&mut deployed, p).is_ok() {
                deployed.project_constraints();
                let projected = read_params(&mut deployed);
                p.copy_from_slice(&projected);
            }
        },
    )?;
    write_params(model, &w)?;
    Ok(trace)
}
