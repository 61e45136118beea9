//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::{CMatrix, Complex64};

/// Condition numbers above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let chol = a.clone().cholesky()?;
    let x = chol.solve(b);
    all_finite(&x).then_some(x)
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn row_norms_sq(m: &CMatrix) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect()
}

pub fn col_norms_sq(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// `‖a - b‖_max`, the largest entrywise modulus difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}
