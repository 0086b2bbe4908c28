//! Dense row-major real matrices and their complex pairing.

use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, "{:?}", self.data)
        } else {
            write!(f, "[{:?}, ...]", &self.data[..8])
        }
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of {} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn scalar(value: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![value] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value of a 1x1 matrix.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {}x{} into {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of column `j` as a vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Columns `idx` gathered into a new matrix.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out.data[i * idx.len()..(i + 1) * idx.len()];
            for (d, &j) in dst.iter_mut().zip(idx) {
                *d = src[j];
            }
        }
        out
    }

    /// `self · other`, checked.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: {}x{} · {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(1.0, self, false, other, false, 0.0, &mut out);
        Ok(out)
    }
}

/// `c ← alpha · op(a) · op(b) + beta · c` where `op` optionally transposes.
///
/// Shapes are checked only in debug builds; callers validate user input.
pub(crate) fn gemm(alpha: f64, a: &Matrix, ta: bool, b: &Matrix, tb: bool, beta: f64, c: &mut Matrix) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    debug_assert_eq!(k, k2);
    debug_assert_eq!((c.rows, c.cols), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.scale_in_place(beta);
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides and extents describe exactly the buffers of `a`, `b`
    // and `c`, which are distinct allocations of the checked sizes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Complex-valued matrix held as two real matrices of identical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct CTensor {
    pub re: Matrix,
    pub im: Matrix,
}

impl CTensor {
    pub fn new(re: Matrix, im: Matrix) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Shape(format!(
                "real part {:?} and imaginary part {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { re: Matrix::zeros(rows, cols), im: Matrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { re: Matrix::identity(n), im: Matrix::zeros(n, n) }
    }

    pub fn from_real(re: Matrix) -> Self {
        let im = Matrix::zeros(re.rows(), re.cols());
        Self { re, im }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> num_complex::Complex64) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = f(i, j);
                out.re.set(i, j, z.re);
                out.im.set(i, j, z.im);
            }
        }
        out
    }

    pub fn from_complex(rows: usize, cols: usize, values: &[num_complex::Complex64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!("{} values cannot form {rows}x{cols}", values.len())));
        }
        Ok(Self::from_fn(rows, cols, |i, j| values[i * cols + j]))
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.re.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.re.cols()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.get(r, c), self.im.get(r, c))
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, z: num_complex::Complex64) {
        self.re.set(r, c, z.re);
        self.im.set(r, c, z.im);
    }

    pub fn to_complex_vec(&self) -> Vec<num_complex::Complex64> {
        self.re
            .as_slice()
            .iter()
            .zip(self.im.as_slice())
            .map(|(&a, &b)| num_complex::Complex64::new(a, b))
            .collect()
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.re.sum_sq() + self.im.sum_sq()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { re: self.re.scaled(c), im: self.im.scaled(c) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("add {:?} + {:?}", self.shape(), other.shape())));
        }
        Ok(Self {
            re: self.re.zip_map(&other.re, |a, b| a + b),
            im: self.im.zip_map(&other.im, |a, b| a + b),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("sub {:?} - {:?}", self.shape(), other.shape())));
        }
        Ok(Self {
            re: self.re.zip_map(&other.re, |a, b| a - b),
            im: self.im.zip_map(&other.im, |a, b| a - b),
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self { re: self.re.transpose(), im: self.im.transpose().scaled(-1.0) }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self.sub(other).expect("max_abs_diff shape");
        d.re.max_abs().max(d.im.max_abs())
    }
}

/// Complex matrix product `(a.re·b.re − a.im·b.im) + i(a.re·b.im + a.im·b.re)`.
pub fn cmatmul(a: &CTensor, b: &CTensor) -> Result<CTensor> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cmatmul inner dimensions differ: {:?} · {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, n) = (a.rows(), b.cols());
    let mut re = Matrix::zeros(m, n);
    let mut im = Matrix::zeros(m, n);
    gemm(1.0, &a.re, false, &b.re, false, 0.0, &mut re);
    gemm(-1.0, &a.im, false, &b.im, false, 1.0, &mut re);
    gemm(1.0, &a.re, false, &b.im, false, 0.0, &mut im);
    gemm(1.0, &a.im, false, &b.re, false, 1.0, &mut im);
    Ok(CTensor { re, im })
}
