//! Complex arithmetic on the tape, as pairs of real nodes.

use super::matrix::{CTensor, Matrix};
use super::tape::{Tape, Unary, Var};
use crate::error::Result;

/// A complex node: real and imaginary parts tracked separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CVar {
    pub re: Var,
    pub im: Var,
}

impl Tape {
    pub fn cparam(&mut self, c: &CTensor) -> CVar {
        CVar { re: self.param(c.re.clone()), im: self.param(c.im.clone()) }
    }

    pub fn cconst(&mut self, c: &CTensor) -> CVar {
        CVar { re: self.constant(c.re.clone()), im: self.constant(c.im.clone()) }
    }

    /// Real node viewed as complex with a zero imaginary part.
    pub fn real_as_complex(&mut self, re: Var) -> CVar {
        let (r, c) = self.shape(re);
        let im = self.constant(Matrix::zeros(r, c));
        CVar { re, im }
    }

    pub fn cvalue(&self, v: CVar) -> CTensor {
        CTensor { re: self.value(v.re).clone(), im: self.value(v.im).clone() }
    }

    pub fn cshape(&self, v: CVar) -> (usize, usize) {
        self.shape(v.re)
    }

    pub fn cadd(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: self.add(a.re, b.re)?, im: self.add(a.im, b.im)? })
    }

    pub fn csub(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: self.sub(a.re, b.re)?, im: self.sub(a.im, b.im)? })
    }

    pub fn cscale(&mut self, a: CVar, c: f64) -> CVar {
        CVar { re: self.scale(a.re, c), im: self.scale(a.im, c) }
    }

    /// Complex matrix product.
    pub fn cmatmul(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        // real-valued inputs (e.g. images) skip two of the four products
        if !self.is_tracked(b.im) && self.value(b.im).max_abs() == 0.0 {
            return self.cmatmul_real(a, b.re);
        }
        let rr = self.matmul(a.re, b.re)?;
        let ii = self.matmul(a.im, b.im)?;
        let ri = self.matmul(a.re, b.im)?;
        let ir = self.matmul(a.im, b.re)?;
        Ok(CVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
    }

    /// Complex matrix times real matrix.
    pub fn cmatmul_real(&mut self, a: CVar, x: Var) -> Result<CVar> {
        Ok(CVar { re: self.matmul(a.re, x)?, im: self.matmul(a.im, x)? })
    }

    /// Element-wise complex product.
    pub fn cmul(&mut self, a: CVar, b: CVar) -> Result<CVar> {
        let rr = self.mul(a.re, b.re)?;
        let ii = self.mul(a.im, b.im)?;
        let ri = self.mul(a.re, b.im)?;
        let ir = self.mul(a.im, b.re)?;
        Ok(CVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
    }

    /// Row scaling by a complex column `d (m×1)`: `diag(d) · a`.
    pub fn cmul_col(&mut self, a: CVar, d: CVar) -> Result<CVar> {
        let rr = self.mul_col(a.re, d.re)?;
        let ii = self.mul_col(a.im, d.im)?;
        let ri = self.mul_col(a.im, d.re)?;
        let ir = self.mul_col(a.re, d.im)?;
        Ok(CVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
    }

    /// Multiply both parts by a real node of the same shape.
    pub fn cmul_real(&mut self, a: CVar, f: Var) -> Result<CVar> {
        Ok(CVar { re: self.mul(a.re, f)?, im: self.mul(a.im, f)? })
    }

    /// Multiply by a real 1×1 node.
    pub fn cmul_scalar(&mut self, a: CVar, s: Var) -> Result<CVar> {
        Ok(CVar { re: self.mul_scalar(a.re, s)?, im: self.mul_scalar(a.im, s)? })
    }

    /// Multiply each column by the entries of a real `1×n` row.
    pub fn cmul_row(&mut self, a: CVar, r: Var) -> Result<CVar> {
        Ok(CVar { re: self.mul_row(a.re, r)?, im: self.mul_row(a.im, r)? })
    }

    /// `|a|²` element-wise.
    pub fn cabs_sq(&mut self, a: CVar) -> Result<Var> {
        let r2 = self.unary(a.re, Unary::Square);
        let i2 = self.unary(a.im, Unary::Square);
        self.add(r2, i2)
    }

    /// Total power `Σ |a_ij|²` as a 1×1 node.
    pub fn cpower(&mut self, a: CVar) -> Result<Var> {
        let p = self.cabs_sq(a)?;
        Ok(self.sum(p))
    }

    /// Per-column power `Σ_i |a_ij|²` as a `1×n` row.
    pub fn col_power(&mut self, a: CVar) -> Result<Var> {
        let p = self.cabs_sq(a)?;
        Ok(self.col_sum(p))
    }
}
