//! Define-by-run reverse-mode differentiation over real matrices.
//!
//! Every operation appends a node holding its value and the ids of its
//! parents, so node order is a topological order. [`Tape::backward`] walks
//! the nodes once in reverse and returns gradients for the tracked leaves.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Built-in element-wise maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Cos,
    Sin,
    Square,
    Sqrt,
    /// `1/sqrt(x)`, with `x` clamped below at `1e-300`.
    InvSqrt,
    /// `min(1, sqrt(cap/x))`: the gain that brings power `x` under `cap`.
    CapGain(f64),
}

impl Unary {
    fn value(self, x: f64) -> f64 {
        match self {
            Unary::Relu => x.max(0.0),
            Unary::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Unary::Tanh => x.tanh(),
            Unary::Cos => x.cos(),
            Unary::Sin => x.sin(),
            Unary::Square => x * x,
            Unary::Sqrt => x.max(0.0).sqrt(),
            Unary::InvSqrt => 1.0 / x.max(1e-300).sqrt(),
            Unary::CapGain(cap) => {
                if x <= cap {
                    1.0
                } else {
                    (cap / x).sqrt()
                }
            }
        }
    }

    fn deriv(self, x: f64, y: f64) -> f64 {
        match self {
            // sub-gradient at the kink is 0
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Unary::Tanh => 1.0 - y * y,
            Unary::Cos => -x.sin(),
            Unary::Sin => x.cos(),
            Unary::Square => 2.0 * x,
            Unary::Sqrt => {
                if x > 0.0 {
                    0.5 / y
                } else {
                    0.0
                }
            }
            Unary::InvSqrt => -0.5 * y / x.max(1e-300),
            Unary::CapGain(cap) => {
                if x <= cap {
                    0.0
                } else {
                    -0.5 * y / x
                }
            }
        }
    }
}

/// A scalar function applied element-wise, with its derivative.
pub trait ElementMap: fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
}

/// A function of the modulus `r = sqrt(re² + im²)` of a complex entry.
///
/// Implementations must give `deriv(0) == 0` or accept that the gradient at
/// the origin is taken as zero.
pub trait RadialMap: fmt::Debug {
    fn value(&self, r: f64) -> f64;
    fn deriv(&self, r: f64) -> f64;
}

/// Layout of a circular im2col: `channels × (len·batch)` in, with samples in
/// contiguous column blocks of `len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Im2Col {
    pub channels: usize,
    pub len: usize,
    pub kernel: usize,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddCol(Var, Var),
    MulCol(Var, Var),
    MulRow(Var, Var),
    MulScalar(Var, Var),
    MatMul(Var, Var),
    Unary(Var, Unary),
    Map(Var, Rc<dyn ElementMap>),
    Radial(Var, Var, Rc<dyn RadialMap>),
    Sum(Var),
    ColSum(Var),
    SoftmaxXent(Var, Rc<[usize]>),
    Im2Col(Var, Im2Col),
    GroupMeanCols(Var, usize),
    Fold(Var, usize),
}

struct Node {
    value: Matrix,
    op: Op,
    tracked: bool,
}

/// Operation recorder. Build one per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to the tracked leaves.
#[derive(Debug, Default)]
pub struct Gradients {
    map: BTreeMap<Var, Matrix>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.map.get(&v)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.map.remove(&v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Matrix)> {
        self.map.iter()
    }
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Matrix, tracked: bool) -> Var {
        self.push(value, Op::Leaf, tracked)
    }

    /// Gradient-tracked leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, value: Matrix, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let t = self.tracked(&[a, b]);
        Ok(self.push(v, Op::Add(a, b), t))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let t = self.tracked(&[a, b]);
        Ok(self.push(v, Op::Sub(a, b), t))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let t = self.tracked(&[a, b]);
        Ok(self.push(v, Op::Mul(a, b), t))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scaled(c);
        let t = self.tracked(&[a]);
        self.push(v, Op::Scale(a, c), t)
    }

    /// `a (m×n) + bias (m×1)` broadcast across columns.
    pub fn add_col(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sb != (sa.0, 1) {
            return Err(shape_err("add_col", sa, sb));
        }
        let mut v = self.value(a).clone();
        let n = sa.1;
        let b = self.value(bias).as_slice().to_vec();
        for (i, row) in v.as_mut_slice().chunks_mut(n.max(1)).enumerate() {
            for x in row {
                *x += b[i];
            }
        }
        let t = self.tracked(&[a, bias]);
        Ok(self.push(v, Op::AddCol(a, bias), t))
    }

    /// `a (m×n) ⊙ d (m×1)` broadcast across columns: row scaling.
    pub fn mul_col(&mut self, a: Var, d: Var) -> Result<Var> {
        let (sa, sd) = (self.shape(a), self.shape(d));
        if sd != (sa.0, 1) {
            return Err(shape_err("mul_col", sa, sd));
        }
        let mut v = self.value(a).clone();
        let n = sa.1;
        let dv = self.value(d).as_slice().to_vec();
        for (i, row) in v.as_mut_slice().chunks_mut(n.max(1)).enumerate() {
            for x in row {
                *x *= dv[i];
            }
        }
        let t = self.tracked(&[a, d]);
        Ok(self.push(v, Op::MulCol(a, d), t))
    }

    /// `a (m×n) ⊙ r (1×n)` broadcast across rows: column scaling.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(r));
        if sr != (1, sa.1) {
            return Err(shape_err("mul_row", sa, sr));
        }
        let mut v = self.value(a).clone();
        let rv = self.value(r).as_slice().to_vec();
        for row in v.as_mut_slice().chunks_mut(sa.1.max(1)) {
            for (x, s) in row.iter_mut().zip(&rv) {
                *x *= s;
            }
        }
        let t = self.tracked(&[a, r]);
        Ok(self.push(v, Op::MulRow(a, r), t))
    }

    /// `a · s` with `s` a 1×1 node.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(shape_err("mul_scalar", self.shape(a), self.shape(s)));
        }
        let c = self.value(s).item();
        let v = self.value(a).scaled(c);
        let t = self.tracked(&[a, s]);
        Ok(self.push(v, Op::MulScalar(a, s), t))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        let t = self.tracked(&[a, b]);
        Ok(self.push(v, Op::MatMul(a, b), t))
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Var {
        let v = self.value(a).map(|x| f.value(x));
        let t = self.tracked(&[a]);
        self.push(v, Op::Unary(a, f), t)
    }

    pub fn map(&mut self, a: Var, f: Rc<dyn ElementMap>) -> Var {
        let v = self.value(a).map(|x| f.value(x));
        let t = self.tracked(&[a]);
        self.push(v, Op::Map(a, f), t)
    }

    /// `f(|re + i·im|)` element-wise.
    pub fn radial(&mut self, re: Var, im: Var, f: Rc<dyn RadialMap>) -> Result<Var> {
        self.same_shape("radial", re, im)?;
        let v = self.value(re).zip_map(self.value(im), |a, b| f.value(a.hypot(b)));
        let t = self.tracked(&[re, im]);
        Ok(self.push(v, Op::Radial(re, im, f), t))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        let t = self.tracked(&[a]);
        self.push(v, Op::Sum(a), t)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Column sums as a 1×n row.
    pub fn col_sum(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let (r, c) = m.shape();
        let mut out = Matrix::zeros(1, c);
        for i in 0..r {
            for j in 0..c {
                out.as_mut_slice()[j] += m.get(i, j);
            }
        }
        let t = self.tracked(&[a]);
        self.push(out, Op::ColSum(a), t)
    }

    /// Mean softmax cross-entropy of `logits (classes × batch)` against labels.
    pub fn softmax_xent(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (c, b) = self.shape(logits);
        if labels.len() != b {
            return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Contract(format!("label {bad} outside {c} classes")));
        }
        let m = self.value(logits);
        let mut loss = 0.0;
        for (j, &y) in labels.iter().enumerate() {
            let mx = (0..c).map(|i| m.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + (0..c).map(|i| (m.get(i, j) - mx).exp()).sum::<f64>().ln();
            loss += lse - m.get(y, j);
        }
        let v = Matrix::scalar(loss / b.max(1) as f64);
        let t = self.tracked(&[logits]);
        Ok(self.push(v, Op::SoftmaxXent(logits, labels.into()), t))
    }

    /// Circular im2col: input `channels × (len·batch)`, output
    /// `(channels·kernel) × (len·batch)` with
    /// `out[c·kernel + j, b·len + t] = x[c, b·len + (t − j) mod len]`.
    pub fn im2col(&mut self, x: Var, spec: Im2Col) -> Result<Var> {
        let (r, cols) = self.shape(x);
        if r != spec.channels || spec.len == 0 || cols % spec.len != 0 {
            return Err(Error::Shape(format!("im2col {spec:?} on {r}x{cols}")));
        }
        let xv = self.value(x);
        let batch = cols / spec.len;
        let mut out = Matrix::zeros(spec.channels * spec.kernel, cols);
        for c in 0..spec.channels {
            let src = &xv.as_slice()[c * cols..(c + 1) * cols];
            for j in 0..spec.kernel {
                let row = c * spec.kernel + j;
                let dst = &mut out.as_mut_slice()[row * cols..(row + 1) * cols];
                for b in 0..batch {
                    let base = b * spec.len;
                    for t in 0..spec.len {
                        let s = (t + spec.len * spec.kernel - j) % spec.len;
                        dst[base + t] = src[base + s];
                    }
                }
            }
        }
        let t = self.tracked(&[x]);
        Ok(self.push(out, Op::Im2Col(x, spec), t))
    }

    /// Mean over consecutive column blocks of `group`: `m × (group·b) → m × b`.
    pub fn group_mean_cols(&mut self, x: Var, group: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if group == 0 || c % group != 0 {
            return Err(Error::Shape(format!("group_mean_cols({group}) on {r}x{c}")));
        }
        let nb = c / group;
        let xv = self.value(x);
        let mut out = Matrix::zeros(r, nb);
        for i in 0..r {
            for b in 0..nb {
                let s: f64 = xv.as_slice()[i * c + b * group..i * c + (b + 1) * group].iter().sum();
                out.set(i, b, s / group as f64);
            }
        }
        let t = self.tracked(&[x]);
        Ok(self.push(out, Op::GroupMeanCols(x, group), t))
    }

    /// Stack column blocks into rows: `m × (g·b) → (m·g) × b` with
    /// `out[i·g + t, b] = x[i, b·g + t]`.
    pub fn fold(&mut self, x: Var, group: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if group == 0 || c % group != 0 {
            return Err(Error::Shape(format!("fold({group}) on {r}x{c}")));
        }
        let nb = c / group;
        let xv = self.value(x);
        let mut out = Matrix::zeros(r * group, nb);
        for i in 0..r {
            for b in 0..nb {
                for t in 0..group {
                    out.set(i * group + t, b, xv.get(i, b * group + t));
                }
            }
        }
        let tr = self.tracked(&[x]);
        Ok(self.push(out, Op::Fold(x, group), tr))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut out = Gradients::default();
        if !self.nodes[loss.0].tracked {
            return Ok(out);
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    out.map.insert(Var(idx), g);
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, || g.clone());
                    self.acc(&mut grads, *b, || g.clone());
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, || g.clone());
                    self.acc(&mut grads, *b, || g.scaled(-1.0));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    self.acc(&mut grads, *a, || g.zip_map(vb, |x, y| x * y));
                    self.acc(&mut grads, *b, || g.zip_map(va, |x, y| x * y));
                }
                Op::Scale(a, c) => {
                    self.acc(&mut grads, *a, || g.scaled(*c));
                }
                Op::AddCol(a, bias) => {
                    self.acc(&mut grads, *a, || g.clone());
                    self.acc(&mut grads, *bias, || row_sums(&g));
                }
                Op::MulCol(a, d) => {
                    let (va, vd) = (self.value(*a), self.value(*d));
                    self.acc(&mut grads, *a, || {
                        let mut ga = g.clone();
                        let n = ga.cols().max(1);
                        for (i, row) in ga.as_mut_slice().chunks_mut(n).enumerate() {
                            let s = vd.as_slice()[i];
                            row.iter_mut().for_each(|x| *x *= s);
                        }
                        ga
                    });
                    self.acc(&mut grads, *d, || row_sums(&g.zip_map(va, |x, y| x * y)));
                }
                Op::MulRow(a, r) => {
                    let (va, vr) = (self.value(*a), self.value(*r));
                    self.acc(&mut grads, *a, || {
                        let mut ga = g.clone();
                        let n = ga.cols().max(1);
                        for row in ga.as_mut_slice().chunks_mut(n) {
                            row.iter_mut().zip(vr.as_slice()).for_each(|(x, s)| *x *= s);
                        }
                        ga
                    });
                    self.acc(&mut grads, *r, || col_sums(&g.zip_map(va, |x, y| x * y)));
                }
                Op::MulScalar(a, s) => {
                    let (va, vs) = (self.value(*a), self.value(*s).item());
                    self.acc(&mut grads, *a, || g.scaled(vs));
                    self.acc(&mut grads, *s, || {
                        Matrix::scalar(g.as_slice().iter().zip(va.as_slice()).map(|(x, y)| x * y).sum())
                    });
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    self.acc(&mut grads, *a, || {
                        let mut ga = Matrix::zeros(va.rows(), va.cols());
                        gemm(1.0, &g, false, vb, true, 0.0, &mut ga);
                        ga
                    });
                    self.acc(&mut grads, *b, || {
                        let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                        gemm(1.0, va, true, &g, false, 0.0, &mut gb);
                        gb
                    });
                }
                Op::Unary(a, f) => {
                    let va = self.value(*a);
                    let y = &node.value;
                    self.acc(&mut grads, *a, || {
                        let mut ga = g.clone();
                        for ((gi, &x), &yi) in ga.as_mut_slice().iter_mut().zip(va.as_slice()).zip(y.as_slice()) {
                            *gi *= f.deriv(x, yi);
                        }
                        ga
                    });
                }
                Op::Map(a, f) => {
                    let va = self.value(*a);
                    self.acc(&mut grads, *a, || g.zip_map(va, |gi, x| gi * f.deriv(x)));
                }
                Op::Radial(re, im, f) => {
                    let (vr, vi) = (self.value(*re), self.value(*im));
                    // d f(r) / d re = f'(r) re / r
                    let dr = vr.zip_map(vi, |a, b| {
                        let r = a.hypot(b);
                        if r > 0.0 {
                            f.deriv(r) / r
                        } else {
                            0.0
                        }
                    });
                    self.acc(&mut grads, *re, || {
                        let mut out = g.zip_map(&dr, |x, y| x * y);
                        out.as_mut_slice().iter_mut().zip(vr.as_slice()).for_each(|(o, a)| *o *= a);
                        out
                    });
                    self.acc(&mut grads, *im, || {
                        let mut out = g.zip_map(&dr, |x, y| x * y);
                        out.as_mut_slice().iter_mut().zip(vi.as_slice()).for_each(|(o, b)| *o *= b);
                        out
                    });
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    self.acc(&mut grads, *a, || Matrix::filled(r, c, g.item()));
                }
                Op::ColSum(a) => {
                    let (r, c) = self.shape(*a);
                    self.acc(&mut grads, *a, || Matrix::from_fn(r, c, |_, j| g.as_slice()[j]));
                }
                Op::SoftmaxXent(logits, labels) => {
                    let m = self.value(*logits);
                    let (c, b) = m.shape();
                    let scale = g.item() / b.max(1) as f64;
                    self.acc(&mut grads, *logits, || {
                        let mut gl = Matrix::zeros(c, b);
                        for (j, &y) in labels.iter().enumerate() {
                            let mx = (0..c).map(|i| m.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
                            let z: f64 = (0..c).map(|i| (m.get(i, j) - mx).exp()).sum();
                            for i in 0..c {
                                let p = (m.get(i, j) - mx).exp() / z;
                                let t = if i == y { 1.0 } else { 0.0 };
                                gl.set(i, j, scale * (p - t));
                            }
                        }
                        gl
                    });
                }
                Op::Im2Col(x, spec) => {
                    let (_, cols) = self.shape(*x);
                    self.acc(&mut grads, *x, || {
                        let batch = cols / spec.len;
                        let mut gx = Matrix::zeros(spec.channels, cols);
                        for c in 0..spec.channels {
                            for j in 0..spec.kernel {
                                let row = c * spec.kernel + j;
                                let src = &g.as_slice()[row * cols..(row + 1) * cols];
                                let dst = &mut gx.as_mut_slice()[c * cols..(c + 1) * cols];
                                for b in 0..batch {
                                    let base = b * spec.len;
                                    for t in 0..spec.len {
                                        let s = (t + spec.len * spec.kernel - j) % spec.len;
                                        dst[base + s] += src[base + t];
                                    }
                                }
                            }
                        }
                        gx
                    });
                }
                Op::GroupMeanCols(x, group) => {
                    let (r, c) = self.shape(*x);
                    let k = *group;
                    self.acc(&mut grads, *x, || Matrix::from_fn(r, c, |i, j| g.get(i, j / k) / k as f64));
                }
                Op::Fold(x, group) => {
                    let (r, c) = self.shape(*x);
                    let k = *group;
                    self.acc(&mut grads, *x, || Matrix::from_fn(r, c, |i, j| g.get(i * k + j % k, j / k)));
                }
            }
        }
        Ok(out)
    }

    fn acc(&self, grads: &mut [Option<Matrix>], v: Var, g: impl FnOnce() -> Matrix) {
        if !self.nodes[v.0].tracked {
            return;
        }
        let g = g();
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

fn row_sums(m: &Matrix) -> Matrix {
    let n = m.cols().max(1);
    Matrix::column(&m.as_slice().chunks(n).map(|r| r.iter().sum()).collect::<Vec<_>>())
}

fn col_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for row in m.as_slice().chunks(m.cols().max(1)) {
        out.as_mut_slice().iter_mut().zip(row).for_each(|(o, x)| *o += x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three_has_gradient_six() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(t.value(y).item(), 9.0);
        assert_eq!(g.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn constant_branch_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(2.0));
        let c = t.constant(Matrix::scalar(5.0));
        let y = t.add(x, c).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 1.0);
        assert!(g.get(c).is_none());

        // a loss that does not depend on x at all
        let k = t.scale(c, 2.0);
        let g = t.backward(k).unwrap();
        assert!(g.get(x).is_none());
    }

    #[test]
    fn untracked_graph_gives_empty_map() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::from_vec(2, 2, vec![1., 2., 3., 4.]).unwrap());
        let s = t.sum(a);
        assert!(t.backward(s).unwrap().is_empty());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let a = t.param(Matrix::zeros(2, 1));
        assert!(matches!(t.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = sum((a+a) ⊙ a) = 2 Σ a², df/da = 4a
        let mut t = Tape::new();
        let a = t.param(Matrix::from_vec(1, 3, vec![1., -2., 0.5]).unwrap());
        let s = t.add(a, a).unwrap();
        let p = t.mul(s, a).unwrap();
        let f = t.sum(p);
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(a).unwrap().as_slice(), &[4., -8., 2.]);
    }

    #[test]
    fn im2col_is_circular() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_vec(1, 4, vec![1., 2., 3., 4.]).unwrap());
        let c = t.im2col(x, Im2Col { channels: 1, len: 4, kernel: 2 }).unwrap();
        // row 0: shift 0, row 1: shift by one (x[t-1])
        assert_eq!(t.value(c).as_slice(), &[1., 2., 3., 4., 4., 1., 2., 3.]);
    }

    #[test]
    fn fold_and_group_mean_layouts() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_vec(1, 4, vec![1., 2., 3., 4.]).unwrap());
        let f = t.fold(x, 2).unwrap();
        assert_eq!(t.value(f).shape(), (2, 2));
        assert_eq!(t.value(f).as_slice(), &[1., 3., 2., 4.]);
        let m = t.group_mean_cols(x, 2).unwrap();
        assert_eq!(t.value(m).as_slice(), &[1.5, 3.5]);
    }
}
