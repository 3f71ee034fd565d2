//! Dense reference computations for verification on small problems.
//!
//! These run through nalgebra and share no code with the sparse kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

/// Largest dimension accepted by the dense paths.
pub const DENSE_LIMIT: usize = 500;

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

pub fn to_dmatrix(a: &SparseSymmetric) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n(), a.n());
    for (i, j, v) in a.iter() {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// Full inverse by LU elimination with partial pivoting.
pub fn dense_inverse_oracle(a: &SparseSymmetric) -> Result<DMatrix<f64>> {
    check_size(a.n())?;
    to_dmatrix(a).lu().try_inverse().ok_or(Error::SingularMatrix)
}

/// `ln det A` through a dense Cholesky factorization.
pub fn dense_log_det(a: &SparseSymmetric) -> Result<f64> {
    check_size(a.n())?;
    log_det_spd(to_dmatrix(a))
}

pub fn dense_solve(a: &SparseSymmetric, b: &[f64]) -> Result<Vec<f64>> {
    check_size(a.n())?;
    if b.len() != a.n() {
        return Err(Error::SizeMismatch {
            expected: a.n(),
            got: b.len(),
        });
    }
    to_dmatrix(a)
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or(Error::SingularMatrix)
}

pub(crate) fn log_det_spd(m: DMatrix<f64>) -> Result<f64> {
    let chol = m.cholesky().ok_or(Error::SingularMatrix)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}
