//! Finite-difference verification of tape gradients.
//!
//! [`check`] compares reverse-mode gradients against central differences for
//! one function; [`run_suite`] sweeps every differentiable operation, every
//! activation model and the composite complex ops over random instances.

use std::rc::Rc;

use rand::Rng;

use super::{Im2Col, Matrix, Tape, Unary, Var};
use crate::activation::{apply_activation_real, apply_activation_var, ActivationModel};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const DEFAULT_STEP: f64 = 1e-4;

/// Function under test: builds its graph from the given input leaves.
pub type Builder = Rc<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// Relative error `‖g_ad − g_fd‖ / max(‖g_ad‖, ‖g_fd‖, 1e-6)` over all inputs.
///
/// Non-scalar outputs are reduced to a scalar with fixed random weights, so
/// every output entry contributes to the check.
pub fn check(inputs: &[Matrix], f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>, step: f64) -> Result<f64> {
    let mut weights: Option<Matrix> = None;
    let mut eval = |xs: &[Matrix], grad: bool| -> Result<(f64, Vec<Matrix>)> {
        let mut t = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| t.param(x.clone())).collect();
        let out = f(&mut t, &vars)?;
        let (r, c) = t.shape(out);
        let w = weights.get_or_insert_with(|| {
            if (r, c) == (1, 1) {
                Matrix::scalar(1.0)
            } else {
                let mut s = rng::stream(0, "gradcheck-reduce");
                Matrix::from_fn(r, c, |_, _| s.random_range(-1.0..1.0))
            }
        });
        if w.shape() != (r, c) {
            return Err(Error::Shape("output shape changed between evaluations".into()));
        }
        let wv = t.constant(w.clone());
        let prod = t.mul(out, wv)?;
        let loss = t.sum(prod);
        let value = t.value(loss).item();
        if !grad {
            return Ok((value, Vec::new()));
        }
        let mut g = t.backward(loss)?;
        let grads = vars
            .iter()
            .zip(xs)
            .map(|(v, x)| g.take(*v).unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols())))
            .collect();
        Ok((value, grads))
    };

    let (_, ad) = eval(inputs, true)?;
    let mut xs = inputs.to_vec();
    let (mut diff, mut ad_sq, mut fd_sq) = (0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        for k in 0..xs[i].len() {
            let orig = xs[i].as_slice()[k];
            xs[i].as_mut_slice()[k] = orig + step;
            let (fp, _) = eval(&xs, false)?;
            xs[i].as_mut_slice()[k] = orig - step;
            let (fm, _) = eval(&xs, false)?;
            xs[i].as_mut_slice()[k] = orig;
            let fd = (fp - fm) / (2.0 * step);
            let a = ad[i].as_slice()[k];
            diff += (a - fd).powi(2);
            ad_sq += a * a;
            fd_sq += fd * fd;
        }
    }
    Ok(diff.sqrt() / ad_sq.sqrt().max(fd_sq.sqrt()).max(1e-6))
}

#[derive(Clone, Debug)]
pub struct OpReport {
    pub name: String,
    pub instances: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub ops: Vec<OpReport>,
}

impl SuiteReport {
    pub fn max_rel_err(&self) -> f64 {
        self.ops.iter().map(|o| o.max_rel_err).fold(0.0, f64::max)
    }

    pub fn min_instances(&self) -> usize {
        self.ops.iter().map(|o| o.instances).min().unwrap_or(0)
    }

    pub fn failures(&self, tol: f64) -> Vec<&OpReport> {
        self.ops.iter().filter(|o| !(o.max_rel_err <= tol)).collect()
    }
}

/// Names of every case in the suite.
pub const SUITE_OPS: &[&str] = &[
    "add",
    "sub",
    "mul",
    "scale",
    "add_col",
    "mul_col",
    "mul_row",
    "mul_scalar",
    "matmul",
    "relu",
    "leaky_relu",
    "tanh",
    "cos",
    "sin",
    "square",
    "sqrt",
    "inv_sqrt",
    "cap_gain",
    "sum",
    "mean",
    "col_sum",
    "softmax_xent",
    "im2col",
    "group_mean_cols",
    "fold",
    "cmatmul",
    "cmul",
    "cmul_col",
    "col_power",
    "wx_norm_sq",
    "act_rapp",
    "act_saleh",
    "act_relu",
    "act_leaky_relu",
    "act_envelope_clip",
    "act_real_rapp",
    "act_real_saleh",
];

/// Runs every case `instances` times with fresh random shapes and values.
pub fn run_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut ops = Vec::with_capacity(SUITE_OPS.len());
    for (idx, name) in SUITE_OPS.iter().enumerate() {
        let mut s = rng::substream(seed, "gradcheck", idx as u64);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let (inputs, f) = instance(name, &mut s)?;
            let e = check(&inputs, f.as_ref(), DEFAULT_STEP)?;
            worst = if e.is_nan() { f64::NAN } else { worst.max(e) };
        }
        ops.push(OpReport { name: name.to_string(), instances, max_rel_err: worst });
    }
    Ok(SuiteReport { ops })
}

fn dim(s: &mut Stream) -> usize {
    s.random_range(1..=4)
}

fn uniform(s: &mut Stream, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| s.random_range(lo..hi))
}

/// Random values with magnitude in `[0.05, 1.5]`, keeping clear of kinks at 0.
fn off_zero(s: &mut Stream, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| {
        let m = s.random_range(0.05..1.5);
        if s.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

fn b(f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static) -> Builder {
    Rc::new(f)
}

fn unary_case(u: Unary, x: Matrix) -> (Vec<Matrix>, Builder) {
    (vec![x], b(move |t, v| Ok(t.unary(v[0], u))))
}

/// Complex activation on a `(re, im)` pair, reduced through both parts.
fn activation_case(model: ActivationModel, inputs: Vec<Matrix>) -> (Vec<Matrix>, Builder) {
    (
        inputs,
        b(move |t, v| {
            let y = apply_activation_var(t, crate::diffcore::CVar { re: v[0], im: v[1] }, &model)?;
            let shift = t.scale(y.im, 0.7);
            t.add(y.re, shift)
        }),
    )
}

fn instance(name: &str, s: &mut Stream) -> Result<(Vec<Matrix>, Builder)> {
    let (r, c) = (dim(s), dim(s));
    let x = uniform(s, r, c, -1.5, 1.5);
    let y = uniform(s, r, c, -1.5, 1.5);
    Ok(match name {
        "add" => (vec![x, y], b(|t, v| t.add(v[0], v[1]))),
        "sub" => (vec![x, y], b(|t, v| t.sub(v[0], v[1]))),
        "mul" => (vec![x, y], b(|t, v| t.mul(v[0], v[1]))),
        "scale" => {
            let k = s.random_range(-2.0..2.0);
            (vec![x], b(move |t, v| Ok(t.scale(v[0], k))))
        }
        "add_col" => (vec![x, uniform(s, r, 1, -1.0, 1.0)], b(|t, v| t.add_col(v[0], v[1]))),
        "mul_col" => (vec![x, uniform(s, r, 1, -1.0, 1.0)], b(|t, v| t.mul_col(v[0], v[1]))),
        "mul_row" => (vec![x, uniform(s, 1, c, -1.0, 1.0)], b(|t, v| t.mul_row(v[0], v[1]))),
        "mul_scalar" => (vec![x, uniform(s, 1, 1, -1.0, 1.0)], b(|t, v| t.mul_scalar(v[0], v[1]))),
        "matmul" => {
            let k = dim(s);
            (vec![uniform(s, r, k, -1.0, 1.0), uniform(s, k, c, -1.0, 1.0)], b(|t, v| t.matmul(v[0], v[1])))
        }
        "relu" => unary_case(Unary::Relu, off_zero(s, r, c)),
        "leaky_relu" => {
            let x = off_zero(s, r, c);
            unary_case(Unary::LeakyRelu(0.1), x)
        }
        "tanh" => unary_case(Unary::Tanh, x),
        "cos" => unary_case(Unary::Cos, x),
        "sin" => unary_case(Unary::Sin, x),
        "square" => unary_case(Unary::Square, x),
        "sqrt" => {
            let x = uniform(s, r, c, 0.1, 3.0);
            unary_case(Unary::Sqrt, x)
        }
        "inv_sqrt" => {
            let x = uniform(s, r, c, 0.1, 3.0);
            unary_case(Unary::InvSqrt, x)
        }
        "cap_gain" => {
            // values straddle the cap but stay away from it
            let x = Matrix::from_fn(r, c, |_, _| if s.random::<bool>() { s.random_range(0.1..0.9) } else { s.random_range(1.1..3.0) });
            unary_case(Unary::CapGain(1.0), x)
        }
        "sum" => (vec![x], b(|t, v| Ok(t.sum(v[0])))),
        "mean" => (vec![x], b(|t, v| Ok(t.mean(v[0])))),
        "col_sum" => (vec![x], b(|t, v| Ok(t.col_sum(v[0])))),
        "softmax_xent" => {
            let classes = s.random_range(2..=5);
            let labels: Vec<usize> = (0..c).map(|_| s.random_range(0..classes)).collect();
            let logits = uniform(s, classes, c, -2.0, 2.0);
            (vec![logits], b(move |t, v| t.softmax_xent(v[0], &labels)))
        }
        "im2col" => {
            let spec = Im2Col { channels: dim(s), len: s.random_range(3..=6), kernel: s.random_range(1..=3) };
            let batch = s.random_range(1..=2);
            let x = uniform(s, spec.channels, spec.len * batch, -1.0, 1.0);
            (vec![x], b(move |t, v| t.im2col(v[0], spec)))
        }
        "group_mean_cols" => {
            let g = s.random_range(1..=3);
            let n = g * s.random_range(1..=3);
            let x = uniform(s, r, n, -1.0, 1.0);
            (vec![x], b(move |t, v| t.group_mean_cols(v[0], g)))
        }
        "fold" => {
            let g = s.random_range(1..=3);
            let n = g * s.random_range(1..=3);
            let x = uniform(s, r, n, -1.0, 1.0);
            (vec![x], b(move |t, v| t.fold(v[0], g)))
        }
        "cmatmul" => {
            let k = dim(s);
            let ins = vec![
                uniform(s, r, k, -1.0, 1.0),
                uniform(s, r, k, -1.0, 1.0),
                uniform(s, k, c, -1.0, 1.0),
                uniform(s, k, c, -1.0, 1.0),
            ];
            (ins, b(|t, v| complex_out(t, |t| {
                let a = crate::diffcore::CVar { re: v[0], im: v[1] };
                let bb = crate::diffcore::CVar { re: v[2], im: v[3] };
                t.cmatmul(a, bb)
            })))
        }
        "cmul" => (
            vec![x, y, uniform(s, r, c, -1.0, 1.0), uniform(s, r, c, -1.0, 1.0)],
            b(|t, v| complex_out(t, |t| t.cmul(crate::diffcore::CVar { re: v[0], im: v[1] }, crate::diffcore::CVar { re: v[2], im: v[3] }))),
        ),
        "cmul_col" => (
            vec![x, y, uniform(s, r, 1, -1.0, 1.0), uniform(s, r, 1, -1.0, 1.0)],
            b(|t, v| complex_out(t, |t| t.cmul_col(crate::diffcore::CVar { re: v[0], im: v[1] }, crate::diffcore::CVar { re: v[2], im: v[3] }))),
        ),
        "col_power" => (vec![x, y], b(|t, v| t.col_power(crate::diffcore::CVar { re: v[0], im: v[1] }))),
        "wx_norm_sq" => {
            // ‖W x‖² for complex W and x
            let k = dim(s);
            let ins = vec![
                uniform(s, r, k, -1.0, 1.0),
                uniform(s, r, k, -1.0, 1.0),
                uniform(s, k, 1, -1.0, 1.0),
                uniform(s, k, 1, -1.0, 1.0),
            ];
            (
                ins,
                b(|t, v| {
                    let w = crate::diffcore::CVar { re: v[0], im: v[1] };
                    let x = crate::diffcore::CVar { re: v[2], im: v[3] };
                    let wx = t.cmatmul(w, x)?;
                    t.cpower(wx)
                }),
            )
        }
        "act_rapp" => activation_case(ActivationModel::RAPP_DEFAULT, vec![x, y]),
        "act_saleh" => activation_case(ActivationModel::SALEH_DEFAULT, vec![x, y]),
        "act_relu" => {
            let ins = vec![off_zero(s, r, c), off_zero(s, r, c)];
            activation_case(ActivationModel::IdealRelu, ins)
        }
        "act_leaky_relu" => {
            let ins = vec![off_zero(s, r, c), off_zero(s, r, c)];
            activation_case(ActivationModel::LeakyRelu { slope: 0.2 }, ins)
        }
        "act_envelope_clip" => {
            // moduli kept away from the ceiling
            let mut re = Matrix::zeros(r, c);
            let mut im = Matrix::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    let m = if s.random::<bool>() { s.random_range(0.05..0.4) } else { s.random_range(0.6..2.0) };
                    let a = s.random_range(0.0..std::f64::consts::TAU);
                    re.set(i, j, m * a.cos());
                    im.set(i, j, m * a.sin());
                }
            }
            activation_case(ActivationModel::EnvelopeClip { ceiling: 0.5 }, vec![re, im])
        }
        "act_real_rapp" => {
            let x = off_zero(s, r, c);
            (vec![x], b(|t, v| Ok(apply_activation_real(t, v[0], &ActivationModel::RAPP_DEFAULT))))
        }
        "act_real_saleh" => {
            let x = off_zero(s, r, c);
            (vec![x], b(|t, v| Ok(apply_activation_real(t, v[0], &ActivationModel::SALEH_DEFAULT))))
        }
        other => return Err(Error::Contract(format!("unknown gradcheck case {other}"))),
    })
}

/// Collapses a complex result to a real node so both parts are checked.
fn complex_out(t: &mut Tape, f: impl FnOnce(&mut Tape) -> Result<crate::diffcore::CVar>) -> Result<Var> {
    let y = f(t)?;
    let im = t.scale(y.im, -0.6);
    t.add(y.re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wx_norm_sq_matches_finite_differences() {
        let mut s = rng::stream(3, "test");
        for _ in 0..20 {
            let (ins, f) = instance("wx_norm_sq", &mut s).unwrap();
            assert!(check(&ins, f.as_ref(), DEFAULT_STEP).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn detects_wrong_gradient() {
        #[derive(Debug)]
        struct Wrong;
        impl crate::diffcore::ElementMap for Wrong {
            fn value(&self, x: f64) -> f64 {
                x * x
            }
            fn deriv(&self, x: f64) -> f64 {
                x
            }
        }
        let x = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let e = check(&[x], &|t, v| Ok(t.map(v[0], Rc::new(Wrong))), DEFAULT_STEP).unwrap();
        assert!(e > 0.1, "{e}");
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(5, 11).unwrap();
        assert_eq!(report.ops.len(), SUITE_OPS.len());
        assert!(report.failures(1e-5).is_empty(), "{:?}", report.failures(1e-5));
    }
}
