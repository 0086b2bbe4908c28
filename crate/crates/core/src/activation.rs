//! Hardware activation functions: power-amplifier saturation (Rapp, Saleh),
//! diode rectifiers (ReLU, leaky ReLU) and envelope clipping.
//!
//! PA models act on the modulus of each complex sample and keep its phase,
//! apart from the Saleh AM/PM rotation. Rectifiers act on the real and
//! imaginary components separately, like a diode on a signed voltage.

use std::rc::Rc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffcore::{CTensor, CVar, ElementMap, RadialMap, Tape, Unary, Var};
use crate::error::{Error, Result};

/// Memoryless nonlinearity applied by a physical layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationModel {
    Linear,
    Rapp { a_sat: f64, p: f64 },
    Saleh { alpha_a: f64, beta_a: f64, alpha_phi: f64, beta_phi: f64 },
    IdealRelu,
    LeakyRelu { slope: f64 },
    EnvelopeClip { ceiling: f64 },
}

impl ActivationModel {
    /// Rapp curve shown for PA-based activations: `A_sat = 1`, `p = 2`.
    pub const RAPP_DEFAULT: Self = Self::Rapp { a_sat: 1.0, p: 2.0 };

    /// Saleh parameters `α_a = 1.2, β_a = 1.43, α_φ = 0.37, β_φ = 0.68`.
    pub const SALEH_DEFAULT: Self = Self::Saleh { alpha_a: 1.2, beta_a: 1.43, alpha_phi: 0.37, beta_phi: 0.68 };

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Contract(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Self::Linear | Self::IdealRelu => Ok(()),
            Self::Rapp { a_sat, p } => {
                positive("a_sat", a_sat)?;
                positive("p", p)
            }
            Self::Saleh { alpha_a, beta_a, alpha_phi, beta_phi } => {
                positive("alpha_a", alpha_a)?;
                positive("beta_a", beta_a)?;
                positive("alpha_phi", alpha_phi)?;
                positive("beta_phi", beta_phi)
            }
            Self::LeakyRelu { slope } => {
                if slope > 0.0 && slope < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Contract(format!("leaky slope must lie in (0,1), got {slope}")))
                }
            }
            Self::EnvelopeClip { ceiling } => positive("ceiling", ceiling),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }

    /// Output for one complex sample.
    pub fn apply_scalar(&self, z: Complex64) -> Complex64 {
        match *self {
            Self::Linear => z,
            Self::Rapp { a_sat, p } => z * RappGain { a_sat, p }.value(z.norm()),
            Self::Saleh { alpha_a, beta_a, alpha_phi, beta_phi } => {
                let r = z.norm();
                let gain = SalehGain { alpha_a, beta_a }.value(r);
                let phi = alpha_phi * r * r / (1.0 + beta_phi * r * r);
                z * gain * Complex64::from_polar(1.0, phi)
            }
            Self::IdealRelu => Complex64::new(z.re.max(0.0), z.im.max(0.0)),
            Self::LeakyRelu { slope } => {
                let f = |x: f64| if x > 0.0 { x } else { slope * x };
                Complex64::new(f(z.re), f(z.im))
            }
            Self::EnvelopeClip { ceiling } => z * ClipGain { ceiling }.value(z.norm()),
        }
    }
}

/// Rapp AM/AM: `g(r) = r / (1 + (r/a_sat)^{2p})^{1/(2p)}`.
pub fn rapp_amam(r: f64, a_sat: f64, p: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Contract(format!("amplitude must be nonnegative, got {r}")));
    }
    if r > a_sat {
        // same curve, arranged so the result can never round above a_sat
        return Ok(a_sat * (1.0 + (a_sat / r).powf(2.0 * p)).powf(-1.0 / (2.0 * p)));
    }
    Ok(r * RappGain { a_sat, p }.value(r))
}

/// Saleh AM/AM and AM/PM: `(α_a r/(1+β_a r²), α_φ r²/(1+β_φ r²))`.
pub fn saleh_amam_ampm(r: f64, alpha_a: f64, beta_a: f64, alpha_phi: f64, beta_phi: f64) -> Result<(f64, f64)> {
    if r < 0.0 {
        return Err(Error::Contract(format!("amplitude must be nonnegative, got {r}")));
    }
    let r2 = r * r;
    Ok((alpha_a * r / (1.0 + beta_a * r2), alpha_phi * r2 / (1.0 + beta_phi * r2)))
}

/// Value-level activation of every entry.
pub fn apply_activation(x: &CTensor, model: &ActivationModel) -> CTensor {
    if model.is_linear() {
        return x.clone();
    }
    let (r, c) = x.shape();
    CTensor::from_fn(r, c, |i, j| model.apply_scalar(x.get(i, j)))
}

/// Activation recorded on the tape.
pub fn apply_activation_var(tape: &mut Tape, x: CVar, model: &ActivationModel) -> Result<CVar> {
    match *model {
        ActivationModel::Linear => Ok(x),
        ActivationModel::Rapp { a_sat, p } => {
            let f = tape.radial(x.re, x.im, Rc::new(RappGain { a_sat, p }))?;
            tape.cmul_real(x, f)
        }
        ActivationModel::EnvelopeClip { ceiling } => {
            let f = tape.radial(x.re, x.im, Rc::new(ClipGain { ceiling }))?;
            tape.cmul_real(x, f)
        }
        ActivationModel::Saleh { alpha_a, beta_a, alpha_phi, beta_phi } => {
            let g = tape.radial(x.re, x.im, Rc::new(SalehGain { alpha_a, beta_a }))?;
            let c = tape.radial(x.re, x.im, Rc::new(SalehRotation { alpha_phi, beta_phi, sine: false }))?;
            let s = tape.radial(x.re, x.im, Rc::new(SalehRotation { alpha_phi, beta_phi, sine: true }))?;
            // (re + i·im)(cos φ + i·sin φ)
            let rc = tape.mul(x.re, c)?;
            let is = tape.mul(x.im, s)?;
            let rs = tape.mul(x.re, s)?;
            let ic = tape.mul(x.im, c)?;
            let re = tape.sub(rc, is)?;
            let im = tape.add(rs, ic)?;
            tape.cmul_real(CVar { re, im }, g)
        }
        ActivationModel::IdealRelu => Ok(CVar { re: tape.unary(x.re, Unary::Relu), im: tape.unary(x.im, Unary::Relu) }),
        ActivationModel::LeakyRelu { slope } => Ok(CVar {
            re: tape.unary(x.re, Unary::LeakyRelu(slope)),
            im: tape.unary(x.im, Unary::LeakyRelu(slope)),
        }),
    }
}

/// The same curve applied to a real signal, extended as an odd function
/// (`x ↦ sign(x)·g(|x|)` for PA models). Used by the digital reference
/// networks so their activation has exactly the PA shape.
pub fn apply_activation_real(tape: &mut Tape, x: Var, model: &ActivationModel) -> Var {
    match *model {
        ActivationModel::Linear => x,
        ActivationModel::IdealRelu => tape.unary(x, Unary::Relu),
        ActivationModel::LeakyRelu { slope } => tape.unary(x, Unary::LeakyRelu(slope)),
        m => tape.map(x, Rc::new(OddCurve(m))),
    }
}

#[derive(Debug)]
struct OddCurve(ActivationModel);

impl ElementMap for OddCurve {
    fn value(&self, x: f64) -> f64 {
        let y = self.0.apply_scalar(Complex64::new(x.abs(), 0.0)).norm();
        y.copysign(x)
    }

    fn deriv(&self, x: f64) -> f64 {
        let r = x.abs();
        match self.0 {
            ActivationModel::Rapp { a_sat, p } => {
                let f = RappGain { a_sat, p };
                f.value(r) + r * f.deriv(r)
            }
            ActivationModel::Saleh { alpha_a, beta_a, .. } => {
                let f = SalehGain { alpha_a, beta_a };
                f.value(r) + r * f.deriv(r)
            }
            ActivationModel::EnvelopeClip { ceiling } => {
                if r < ceiling {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 1.0,
        }
    }
}

/// `g(r)/r` for the Rapp model.
#[derive(Debug, Clone, Copy)]
pub struct RappGain {
    pub a_sat: f64,
    pub p: f64,
}

impl RadialMap for RappGain {
    fn value(&self, r: f64) -> f64 {
        let u = (r / self.a_sat).powf(2.0 * self.p);
        (1.0 + u).powf(-1.0 / (2.0 * self.p))
    }

    fn deriv(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let u = (r / self.a_sat).powf(2.0 * self.p);
        -(1.0 + u).powf(-1.0 / (2.0 * self.p) - 1.0) * u / r
    }
}

/// `A(r)/r = α_a/(1 + β_a r²)` for the Saleh model.
#[derive(Debug, Clone, Copy)]
pub struct SalehGain {
    pub alpha_a: f64,
    pub beta_a: f64,
}

impl RadialMap for SalehGain {
    fn value(&self, r: f64) -> f64 {
        self.alpha_a / (1.0 + self.beta_a * r * r)
    }

    fn deriv(&self, r: f64) -> f64 {
        let d = 1.0 + self.beta_a * r * r;
        -2.0 * self.alpha_a * self.beta_a * r / (d * d)
    }
}

/// `cos Φ(r)` or `sin Φ(r)` of the Saleh AM/PM curve.
#[derive(Debug, Clone, Copy)]
struct SalehRotation {
    alpha_phi: f64,
    beta_phi: f64,
    sine: bool,
}

impl SalehRotation {
    fn phase(&self, r: f64) -> (f64, f64) {
        let d = 1.0 + self.beta_phi * r * r;
        (self.alpha_phi * r * r / d, 2.0 * self.alpha_phi * r / (d * d))
    }
}

impl RadialMap for SalehRotation {
    fn value(&self, r: f64) -> f64 {
        let (phi, _) = self.phase(r);
        if self.sine {
            phi.sin()
        } else {
            phi.cos()
        }
    }

    fn deriv(&self, r: f64) -> f64 {
        let (phi, dphi) = self.phase(r);
        if self.sine {
            phi.cos() * dphi
        } else {
            -phi.sin() * dphi
        }
    }
}

/// `min(1, ceiling/r)`.
#[derive(Debug, Clone, Copy)]
struct ClipGain {
    ceiling: f64,
}

impl RadialMap for ClipGain {
    fn value(&self, r: f64) -> f64 {
        if r <= self.ceiling {
            1.0
        } else {
            self.ceiling / r
        }
    }

    fn deriv(&self, r: f64) -> f64 {
        if r <= self.ceiling {
            0.0
        } else {
            -self.ceiling / (r * r)
        }
    }
}

/// `|z|` itself, for magnitude readouts.
#[derive(Debug, Clone, Copy)]
pub struct Modulus;

impl RadialMap for Modulus {
    fn value(&self, r: f64) -> f64 {
        r
    }

    fn deriv(&self, _r: f64) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SALEH: (f64, f64, f64, f64) = (1.2, 1.43, 0.37, 0.68);

    #[test]
    fn rapp_reference_points() {
        assert_eq!(rapp_amam(0.0, 1.0, 2.0).unwrap(), 0.0);
        let g1 = rapp_amam(1.0, 1.0, 2.0).unwrap();
        assert!((g1 - 2f64.powf(-0.25)).abs() < 1e-15);
        assert!((g1 - 0.840_896_415_253_714_6).abs() < 1e-12);
        let g100 = rapp_amam(100.0, 1.0, 2.0).unwrap();
        assert!(g100 < 1.0 && 1.0 - g100 < 1e-6, "{g100}");
        assert!(matches!(rapp_amam(-0.1, 1.0, 2.0), Err(Error::Contract(_))));
    }

    #[test]
    fn saleh_reference_points() {
        let (aa, ba, ap, bp) = SALEH;
        assert_eq!(saleh_amam_ampm(0.0, aa, ba, ap, bp).unwrap(), (0.0, 0.0));
        let (a, phi) = saleh_amam_ampm(1.0, aa, ba, ap, bp).unwrap();
        assert!((a - 1.2 / 2.43).abs() < 1e-15 && (a - 0.493_827_160_493_827).abs() < 1e-12);
        assert!((phi - 0.37 / 1.68).abs() < 1e-15 && (phi - 0.220_238_095_238_095).abs() < 1e-12);
        let r_peak = 1.0 / ba.sqrt();
        let (peak, _) = saleh_amam_ampm(r_peak, aa, ba, ap, bp).unwrap();
        assert!((peak - aa / (2.0 * ba.sqrt())).abs() < 1e-15);
        assert!((peak - 0.501_745).abs() < 1e-6);
        assert!(saleh_amam_ampm(-1.0, aa, ba, ap, bp).is_err());
    }

    #[test]
    fn rapp_preserves_phase() {
        let z = Complex64::from_polar(1.0, PI / 3.0);
        let y = ActivationModel::RAPP_DEFAULT.apply_scalar(z);
        assert!((y.norm() - 0.840_896_415_253_714_6).abs() < 1e-12);
        assert!((y.arg() - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn relu_is_componentwise() {
        let y = ActivationModel::IdealRelu.apply_scalar(Complex64::new(-1.0, 2.0));
        assert_eq!(y, Complex64::new(0.0, 2.0));
        let y = ActivationModel::LeakyRelu { slope: 0.1 }.apply_scalar(Complex64::new(-1.0, 2.0));
        assert!((y - Complex64::new(-0.1, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn envelope_clip_caps_magnitude() {
        let y = ActivationModel::EnvelopeClip { ceiling: 0.5 }.apply_scalar(Complex64::new(0.0, -2.0));
        assert!((y - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        let small = Complex64::new(0.1, 0.2);
        assert_eq!(ActivationModel::EnvelopeClip { ceiling: 0.5 }.apply_scalar(small), small);
    }

    #[test]
    fn linear_is_identity() {
        let x = CTensor::from_fn(2, 3, |i, j| Complex64::new(i as f64 - 1.0, j as f64 * 0.3));
        assert_eq!(apply_activation(&x, &ActivationModel::Linear), x);
    }

    #[test]
    fn parameter_validation() {
        assert!(ActivationModel::Rapp { a_sat: 0.0, p: 2.0 }.validate().is_err());
        assert!(ActivationModel::LeakyRelu { slope: 1.0 }.validate().is_err());
        assert!(ActivationModel::SALEH_DEFAULT.validate().is_ok());
    }

    #[test]
    fn tape_and_value_paths_agree() {
        let x = CTensor::from_fn(3, 2, |i, j| Complex64::new(0.7 * i as f64 - 0.6, 0.9 - 0.8 * j as f64));
        for m in [
            ActivationModel::RAPP_DEFAULT,
            ActivationModel::SALEH_DEFAULT,
            ActivationModel::IdealRelu,
            ActivationModel::LeakyRelu { slope: 0.2 },
            ActivationModel::EnvelopeClip { ceiling: 0.5 },
        ] {
            let mut t = Tape::new();
            let v = t.cconst(&x);
            let y = apply_activation_var(&mut t, v, &m).unwrap();
            assert!(t.cvalue(y).max_abs_diff(&apply_activation(&x, &m)) < 1e-14, "{m:?}");
        }
    }

    #[test]
    fn serde_form() {
        let m: ActivationModel = toml::from_str("kind = \"rapp\"\na_sat = 1.0\np = 2.0").unwrap();
        assert_eq!(m, ActivationModel::RAPP_DEFAULT);
        assert!(toml::from_str::<ActivationModel>("kind = \"rapp\"\na_sat = 1.0\np = 2.0\nq = 1").is_err());
    }
}
