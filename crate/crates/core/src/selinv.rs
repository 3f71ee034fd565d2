//! Selected inversion: the entries of `Z = A^{-1}` on the pattern of `L`
//! plus the diagonal, from an `LDL^T` factorization.
//!
//! From `Z = L^{-T} D^{-1} + Z (I - L)` the columns are produced right to
//! left. For column `j` with strictly-lower pattern `I` and values `l`:
//!
//! ```text
//! Z[I, j] = -Z[I, I] l
//! Z[j, j] = 1 / d_j - l^T Z[I, j]
//! ```
//!
//! Every entry of `Z[I, I]` lies on the pattern of `L` (the rows of a column
//! of `L` form a clique in the filled graph), so the recurrence is closed
//! over the selected set and each computed value is an exact entry of the
//! inverse, up to roundoff.

use crate::error::{Error, Result};
use crate::numeric::LdlFactor;
use crate::sparse::{Permutation, SparseSymmetric};
use crate::symbolic::SymbolicFactor;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SelectedInverse {
    sym: SymbolicFactor,
    z_values: Vec<f64>,
    z_diag: Vec<f64>,
    flops: u64,
}

impl SelectedInverse {
    pub fn n(&self) -> usize {
        self.sym.n()
    }

    pub fn symbolic(&self) -> &SymbolicFactor {
        &self.sym
    }

    pub fn perm(&self) -> &Permutation {
        self.sym.perm()
    }

    /// Strictly-lower selected values in permuted order, aligned with the pattern of `L`.
    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    /// Diagonal of the inverse in permuted order.
    pub fn z_diag(&self) -> &[f64] {
        &self.z_diag
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// Entry in permuted coordinates, `None` off the selected pattern.
    pub fn get_permuted(&self, i: usize, j: usize) -> Option<f64> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r == c {
            return Some(self.z_diag[r]);
        }
        let start = self.sym.l_col_ptr()[c];
        self.sym
            .col_pattern(c)
            .binary_search(&r)
            .ok()
            .map(|k| self.z_values[start + k])
    }

    /// Entry `(i, j)` of the inverse in original coordinates. `Ok(None)` means
    /// the entry was not computed; it does not mean the entry is zero.
    pub fn get_entry(&self, i: usize, j: usize) -> Result<Option<f64>> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { row: i, col: j, n });
        }
        let inv = self.perm().inverse_slice();
        Ok(self.get_permuted(inv[i], inv[j]))
    }

    /// Diagonal of the inverse in original order.
    pub fn diagonal(&self) -> Vec<f64> {
        self.perm().apply_inverse(&self.z_diag)
    }

    /// The selected entries as a symmetric sparse matrix in original coordinates.
    pub fn to_sparse(&self) -> SparseSymmetric {
        let n = self.n();
        let lp = self.sym.l_col_ptr();
        let nnz = n + self.z_values.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for j in 0..n {
            row_idx.push(j);
            values.push(self.z_diag[j]);
            row_idx.extend_from_slice(self.sym.col_pattern(j));
            values.extend_from_slice(&self.z_values[lp[j]..lp[j + 1]]);
            col_ptr.push(row_idx.len());
        }
        let permuted = SparseSymmetric::from_raw_unchecked(n, col_ptr, row_idx, values);
        permuted
            .permute(&self.perm().inverse())
            .expect("permutation size matches")
    }
}

/// Computes the selected inverse from a completed factorization.
pub fn selected_inverse(f: &LdlFactor) -> SelectedInverse {
    let sym = f.symbolic();
    let n = sym.n();
    let lp = sym.l_col_ptr();
    let li = sym.l_row_idx();
    let lx = f.l_values();
    let d = f.d();

    let mut z_values = vec![0.0; li.len()];
    let mut z_diag = vec![0.0; n];
    let mut pos = vec![NONE; n];
    let mut acc = vec![0.0; n];
    let mut flops = 0u64;

    for j in (0..n).rev() {
        let (s, e) = (lp[j], lp[j + 1]);
        let rows = &li[s..e];
        let l = &lx[s..e];
        let m = rows.len();
        for (a, &r) in rows.iter().enumerate() {
            pos[r] = a;
            acc[a] = 0.0;
        }
        // acc = Z[I, I] l, reading each symmetric pair once from the lower triangle
        let mut pairs = 0usize;
        for (b, &rb) in rows.iter().enumerate() {
            let lb = l[b];
            let mut acc_b = z_diag[rb] * lb;
            for q in lp[rb]..lp[rb + 1] {
                let a = pos[li[q]];
                if a != NONE {
                    let z = z_values[q];
                    acc[a] += z * lb;
                    acc_b += z * l[a];
                    pairs += 1;
                }
            }
            acc[b] += acc_b;
        }
        debug_assert_eq!(pairs, m * m.saturating_sub(1) / 2, "column {j} is not closed");
        flops += 2 * m as u64 + 4 * pairs as u64;

        let mut zjj = 1.0 / d[j];
        for a in 0..m {
            let z = -acc[a];
            z_values[s + a] = z;
            zjj -= l[a] * z;
        }
        z_diag[j] = zjj;
        flops += 3 * m as u64;

        for &r in rows {
            pos[r] = NONE;
        }
    }

    SelectedInverse {
        sym: sym.clone(),
        z_values,
        z_diag,
        flops,
    }
}
