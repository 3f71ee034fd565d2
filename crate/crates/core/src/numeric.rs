//! Numeric `LDL^T` on a precomputed symbolic pattern.
//!
//! The factorization is up-looking: row `k` of `L` is obtained by a sparse
//! triangular solve whose nonzero pattern is the reach of row `k` of `A` in
//! the elimination tree. Each step applies the rank-one Schur complement
//! update of the previous pivots to the current row, so the multiply-add
//! count matches `sum m_i^2 - n` exactly.

use crate::error::{Error, Result};
use crate::sparse::{Permutation, SparseSymmetric};
use crate::symbolic::SymbolicFactor;

/// Environment variable overriding [`LdlOptions::near_singular_rel`].
pub const PIVOT_TOL_ENV: &str = "SELDET_PIVOT_TOL";

#[derive(Debug, Clone, Copy)]
pub struct LdlOptions {
    /// Pivots `d_i <= pivot_tol` abort the factorization.
    pub pivot_tol: f64,
    /// Pivots below `near_singular_rel * max |A_ii|` are recorded as near singular.
    pub near_singular_rel: f64,
}

impl Default for LdlOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 0.0,
            near_singular_rel: 1e-13,
        }
    }
}

impl LdlOptions {
    /// Defaults, with `SELDET_PIVOT_TOL` (if set and parseable) replacing the
    /// near-singular threshold.
    pub fn from_env() -> Self {
        let mut opts = Self::default();
        if let Some(v) = std::env::var(PIVOT_TOL_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            opts.near_singular_rel = v;
        }
        opts
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    sym: SymbolicFactor,
    l_values: Vec<f64>,
    d: Vec<f64>,
    near_singular: Vec<usize>,
    flops: u64,
}

impl LdlFactor {
    pub fn symbolic(&self) -> &SymbolicFactor {
        &self.sym
    }

    pub fn perm(&self) -> &Permutation {
        self.sym.perm()
    }

    pub fn n(&self) -> usize {
        self.sym.n()
    }

    /// Strictly-lower values of `L`, aligned with the symbolic pattern.
    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Pivot positions (permuted order) flagged as near singular.
    pub fn near_singular(&self) -> &[usize] {
        &self.near_singular
    }

    /// Floating point operations counted while factorizing.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// `log det A = sum_i ln d_i`.
    pub fn log_det(&self) -> f64 {
        self.d.iter().map(|d| d.ln()).sum()
    }

    /// Solves `A x = b` as `P^T L^{-T} D^{-1} L^{-1} P b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let lp = self.sym.l_col_ptr();
        let li = self.sym.l_row_idx();
        let lx = &self.l_values;
        let mut x = self.perm().apply(b);
        for j in 0..n {
            let xj = x[j];
            for p in lp[j]..lp[j + 1] {
                x[li[p]] -= lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in lp[j]..lp[j + 1] {
                xj -= lx[p] * x[li[p]];
            }
            x[j] = xj;
        }
        Ok(self.perm().apply_inverse(&x))
    }
}

pub fn ldlt_factorize(a: &SparseSymmetric, sym: &SymbolicFactor) -> Result<LdlFactor> {
    ldlt_factorize_with(a, sym, &LdlOptions::default())
}

pub fn ldlt_factorize_with(
    a: &SparseSymmetric,
    sym: &SymbolicFactor,
    opts: &LdlOptions,
) -> Result<LdlFactor> {
    let n = sym.n();
    if a.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: a.n(),
        });
    }
    if a.nnz() != sym.source_nnz() {
        return Err(Error::PatternMismatch(format!(
            "matrix has {} entries, analysis was done on {}",
            a.nnz(),
            sym.source_nnz()
        )));
    }
    let ap = a.permute(sym.perm())?;
    let (up_ptr, up_idx, up_val) = ap.upper_csc();
    let parent = sym.parent();
    let lp = sym.l_col_ptr();
    let li = sym.l_row_idx();

    let max_diag = ap.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let near_tol = opts.near_singular_rel * max_diag;

    let mut lx = vec![0.0; li.len()];
    let mut d = vec![0.0; n];
    let mut filled = vec![0usize; n];
    let mut y = vec![0.0; n];
    let mut flag = vec![usize::MAX; n];
    let mut pattern = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut near_singular = Vec::new();
    let mut flops = 0u64;

    for k in 0..n {
        // nonzero pattern of row k of L, in topological order
        let mut top = n;
        flag[k] = k;
        for p in up_ptr[k]..up_ptr[k + 1] {
            let mut i = up_idx[p];
            y[i] += up_val[p];
            let mut len = 0;
            while flag[i] != k {
                stack[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i].ok_or_else(|| {
                    Error::PatternMismatch(format!("row {k} does not reach its diagonal"))
                })?;
            }
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = stack[len];
            }
        }

        let mut dk = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let start = lp[i];
            let end = start + filled[i];
            for p in start..end {
                y[li[p]] -= lx[p] * yi;
            }
            let l_ki = yi / d[i];
            dk -= l_ki * yi;
            flops += 2 * (end - start) as u64 + 3;
            if end >= lp[i + 1] || li[end] != k {
                return Err(Error::PatternMismatch(format!(
                    "entry ({k}, {i}) is not in the symbolic pattern"
                )));
            }
            lx[end] = l_ki;
            filled[i] += 1;
        }
        if dk.is_nan() || dk <= opts.pivot_tol {
            return Err(Error::NonPositivePivot { index: k, value: dk });
        }
        if dk <= near_tol {
            near_singular.push(k);
        }
        d[k] = dk;
    }

    if let Some(j) = (0..n).find(|&j| filled[j] != lp[j + 1] - lp[j]) {
        return Err(Error::PatternMismatch(format!(
            "column {j} of the symbolic pattern has entries the matrix never fills"
        )));
    }

    Ok(LdlFactor {
        sym: sym.clone(),
        l_values: lx,
        d,
        near_singular,
        flops,
    })
}

/// `sum_i ln d_i`.
pub fn log_det(f: &LdlFactor) -> f64 {
    f.log_det()
}

pub fn solve(f: &LdlFactor, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletList;
    use crate::symbolic::symbolic_factor;

    fn from(n: usize, entries: &[(usize, usize, f64)]) -> SparseSymmetric {
        let mut t = TripletList::new(n);
        entries.iter().for_each(|&(i, j, v)| t.push(i, j, v));
        SparseSymmetric::from_triplets(&t).unwrap()
    }

    fn factor(a: &SparseSymmetric) -> Result<LdlFactor> {
        let s = symbolic_factor(a, &Permutation::identity(a.n()))?;
        ldlt_factorize(a, &s)
    }

    #[test]
    fn identity() {
        let f = factor(&SparseSymmetric::identity(4)).unwrap();
        assert!(f.l_values().is_empty());
        assert_eq!(f.d(), &[1.0; 4]);
        assert_eq!(f.log_det(), 0.0);
        assert_eq!(f.solve(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn two_by_two() {
        let a = from(2, &[(0, 0, 4.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let f = factor(&a).unwrap();
        assert_eq!(f.l_values(), &[0.5]);
        assert_eq!(f.d(), &[4.0, 2.0]);
        assert!((f.log_det() - 8f64.ln()).abs() < 1e-15);
        let x = f.solve(&[8.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert_eq!(f.flops(), 3);
    }

    #[test]
    fn indefinite_pivot() {
        let a = from(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]);
        match factor(&a) {
            Err(Error::NonPositivePivot { index, value }) => {
                assert_eq!(index, 1);
                assert_eq!(value, -3.0);
            }
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn near_singular_is_flagged() {
        let a = from(2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0 + 1e-15)]);
        let f = factor(&a).unwrap();
        assert_eq!(f.near_singular(), &[1]);
    }

    #[test]
    fn mismatched_analysis() {
        let a = from(2, &[(0, 0, 4.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let s = symbolic_factor(&SparseSymmetric::identity(2), &Permutation::identity(2)).unwrap();
        assert!(matches!(ldlt_factorize(&a, &s), Err(Error::PatternMismatch(_))));
        let f = factor(&a).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn permuted_solve() {
        let a = from(3, &[(0, 0, 4.0), (1, 0, 1.0), (1, 1, 5.0), (2, 1, 2.0), (2, 2, 6.0)]);
        let p = Permutation::from_vec(vec![2, 0, 1]).unwrap();
        let s = symbolic_factor(&a, &p).unwrap();
        let f = ldlt_factorize(&a, &s).unwrap();
        let x0 = [1.0, -1.0, 2.0];
        let b = a.mul_vec(&x0).unwrap();
        let x = f.solve(&b).unwrap();
        for (u, v) in x.iter().zip(x0) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
