//! Dense complex linear algebra backed by nalgebra's SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::diffcore::CTensor;
use crate::error::{Error, Result};

pub fn to_na(m: &CTensor) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn from_na(m: &DMatrix<Complex64>) -> CTensor {
    CTensor::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Moore–Penrose pseudo-inverse; singular values below
/// `rcond · σ_max` are treated as zero.
pub fn pinv(m: &CTensor, rcond: f64) -> Result<CTensor> {
    let svd = to_na(m).svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let p = svd.pseudo_inverse(rcond * smax.max(f64::MIN_POSITIVE)).map_err(|e| Error::Contract(format!("pseudo-inverse: {e}")))?;
    Ok(from_na(&p))
}

pub fn singular_values(m: &CTensor) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CTensor) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Largest singular value with its left and right singular vectors.
pub fn top_singular(m: &CTensor) -> (f64, Vec<Complex64>, Vec<Complex64>) {
    let svd = to_na(m).svd(true, true);
    let (idx, s) = svd.singular_values.iter().cloned().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let u = svd.u.as_ref().map(|u| u.column(idx).iter().cloned().collect()).unwrap_or_default();
    let v = svd.v_t.as_ref().map(|vt| vt.row(idx).iter().map(|z| z.conj()).collect()).unwrap_or_default();
    (s, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::cmatmul;
    use crate::rng::{complex_gaussian_matrix, stream};

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let a = complex_gaussian_matrix(&mut stream(1, "t"), 4, 4, 1.0);
        let p = pinv(&a, 1e-12).unwrap();
        assert!(cmatmul(&a, &p).unwrap().max_abs_diff(&CTensor::identity(4)) < 1e-10);
    }

    #[test]
    fn top_singular_pair() {
        let a = complex_gaussian_matrix(&mut stream(2, "t"), 5, 3, 1.0);
        let (s, u, v) = top_singular(&a);
        let vm = CTensor::from_complex(3, 1, &v).unwrap();
        let av = cmatmul(&a, &vm).unwrap();
        for i in 0..5 {
            assert!((av.get(i, 0) - u[i] * s).norm() < 1e-10);
        }
        assert!((s - spectral_norm(&a)).abs() < 1e-12);
    }
}
