//! Reference computations for the integration tests. Nothing here calls the
//! sparse kernels under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use seldet_core::{Permutation, SparseSymmetric};

pub fn dense(a: &SparseSymmetric) -> DMatrix<f64> {
    let n = a.n();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for (&i, &v) in a.col_rows(j).iter().zip(a.col_values(j)) {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse through a dense Cholesky factorization.
pub fn dense_inverse(a: &SparseSymmetric) -> DMatrix<f64> {
    dense(a).cholesky().expect("SPD").inverse()
}

pub fn dense_logdet(a: &SparseSymmetric) -> f64 {
    let l = dense(a).cholesky().expect("SPD").unpack();
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Lower-triangular fill pattern of `P A P^T` by dense symbolic elimination:
/// eliminating `k` connects every pair of its later neighbours.
pub fn dense_fill(a: &SparseSymmetric, p: &Permutation) -> Vec<Vec<bool>> {
    let n = a.n();
    let inv = p.inverse_slice();
    let mut g = vec![vec![false; n]; n];
    for j in 0..n {
        for &i in a.col_rows(j) {
            let (pi, pj) = (inv[i], inv[j]);
            g[pi.max(pj)][pi.min(pj)] = true;
        }
    }
    for k in 0..n {
        let below: Vec<usize> = (k + 1..n).filter(|&i| g[i][k]).collect();
        for (s, &i) in below.iter().enumerate() {
            for &j in &below[..s] {
                g[i][j] = true;
            }
        }
    }
    g
}

/// Column counts of `L` including the diagonal.
pub fn dense_col_counts(a: &SparseSymmetric, p: &Permutation) -> Vec<u64> {
    let g = dense_fill(a, p);
    let n = a.n();
    (0..n).map(|j| 1 + (j + 1..n).filter(|&i| g[i][j]).count() as u64).collect()
}

/// Multiply-add counts of the factorization and of the selected inversion
/// from the column counts: `sum m^2 - n` and `2 (sum m^2 - n) - (sum m - n)`.
pub fn flops_from_counts(m: &[u64]) -> (u64, u64) {
    let n = m.len() as u64;
    let s1: u64 = m.iter().sum();
    let s2: u64 = m.iter().map(|x| x * x).sum();
    let ldlt = s2 - n;
    (ldlt, 2 * ldlt - (s1 - n))
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}
