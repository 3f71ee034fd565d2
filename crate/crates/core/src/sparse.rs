//! Symmetric sparse storage.
//!
//! A [`SparseSymmetric`] keeps only the lower triangle (diagonal included) in
//! compressed-column form. Queries on the upper triangle are answered by
//! swapping the indices. Explicit zeros are structural and are never pruned.

use crate::error::{Error, Result};

/// Relative tolerance used when an explicit `(i, j)` and `(j, i)` pair is
/// checked for agreement.
const SYMMETRY_RTOL: f64 = 1e-12;

/// Symmetric permutation stored in both directions.
///
/// `perm[new] = old` and `inverse[old] = new`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let perm: Vec<usize> = (0..n).collect();
        Self {
            inverse: perm.clone(),
            perm,
        }
    }

    /// Builds a permutation from a `new -> old` map, checking bijectivity.
    pub fn from_vec(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n {
                return Err(Error::NotAPermutation(format!(
                    "index {old} out of range for size {n}"
                )));
            }
            if inverse[old] != usize::MAX {
                return Err(Error::NotAPermutation(format!("index {old} repeated")));
            }
            inverse[old] = new;
        }
        Ok(Self { perm, inverse })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `new -> old`
    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// `old -> new`
    pub fn inverse_slice(&self) -> &[usize] {
        &self.inverse
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            perm: self.inverse.clone(),
            inverse: self.perm.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Gathers `x` into the new ordering: `out[new] = x[perm[new]]`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    /// Scatters `x` back to the original ordering: `out[perm[new]] = x[new]`.
    pub fn apply_inverse<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.inverse.iter().map(|&new| x[new]).collect()
    }
}

/// Assembly staging: unordered `(row, col, value)` entries on an `n x n` grid.
#[derive(Debug, Clone, Default)]
pub struct TripletList {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }
}

/// Lower-triangular compressed-column storage of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Wraps raw CSC arrays after checking every structural invariant.
    pub fn from_raw(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != n + 1 {
            return Err(Error::SizeMismatch {
                expected: n + 1,
                got: col_ptr.len(),
            });
        }
        if row_idx.len() != values.len() {
            return Err(Error::SizeMismatch {
                expected: row_idx.len(),
                got: values.len(),
            });
        }
        if col_ptr[0] != 0 || col_ptr[n] != row_idx.len() {
            return Err(Error::PatternMismatch("column pointers do not span the entries".into()));
        }
        for j in 0..n {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(Error::PatternMismatch(format!("col_ptr decreases at column {j}")));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for (k, &i) in rows.iter().enumerate() {
                if i >= n {
                    return Err(Error::IndexOutOfRange { row: i, col: j, n });
                }
                if i < j {
                    return Err(Error::PatternMismatch(format!(
                        "entry ({i}, {j}) lies above the diagonal"
                    )));
                }
                if k > 0 && rows[k - 1] >= i {
                    return Err(Error::PatternMismatch(format!(
                        "rows of column {j} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub(crate) fn from_raw_unchecked(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), n + 1);
        debug_assert_eq!(row_idx.len(), values.len());
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Assembles from triplets.
    ///
    /// Duplicates are summed. An entry with `row < col` is mirrored into the
    /// lower triangle; when both `(i, j)` and `(j, i)` are given explicitly
    /// their sums must agree and a single copy is kept.
    pub fn from_triplets(t: &TripletList) -> Result<Self> {
        let n = t.n;
        // (col, row, from_upper, value) in lower-triangle coordinates
        let mut staged: Vec<(usize, usize, bool, f64)> = Vec::with_capacity(t.entries.len());
        for &(r, c, v) in &t.entries {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            if r >= c {
                staged.push((c, r, false, v));
            } else {
                staged.push((r, c, true, v));
            }
        }
        staged.sort_by_key(|e| (e.0, e.1, e.2));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(staged.len());
        let mut values = Vec::with_capacity(staged.len());
        let mut k = 0;
        while k < staged.len() {
            let (c, r, _, _) = staged[k];
            let mut lower: Option<f64> = None;
            let mut upper: Option<f64> = None;
            while k < staged.len() && staged[k].0 == c && staged[k].1 == r {
                let slot = if staged[k].2 { &mut upper } else { &mut lower };
                *slot = Some(slot.unwrap_or(0.0) + staged[k].3);
                k += 1;
            }
            let v = match (lower, upper) {
                (Some(l), Some(u)) => {
                    let scale = l.abs().max(u.abs());
                    if (l - u).abs() > SYMMETRY_RTOL * scale {
                        return Err(Error::AsymmetricInput {
                            row: r,
                            col: c,
                            lower: l,
                            upper: u,
                        });
                    }
                    l
                }
                (Some(l), None) => l,
                (None, Some(u)) => u,
                (None, None) => unreachable!(),
            };
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (lower-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Number of structural entries of the full symmetric matrix.
    pub fn nnz_full(&self) -> usize {
        2 * self.nnz() - self.diag_count()
    }

    fn diag_count(&self) -> usize {
        (0..self.n)
            .filter(|&j| self.col_rows(j).first() == Some(&j))
            .count()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn col_rows(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn col_values(&self, j: usize) -> &[f64] {
        &self.values[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    /// Iterates `(row, col, value)` over the stored lower triangle, column by column.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let start = self.col_ptr[c];
        self.col_rows(c).binary_search(&r).ok().map(|k| start + k)
    }

    /// Symmetric lookup; `None` when `(i, j)` is not structural.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i >= self.n || j >= self.n {
            return None;
        }
        self.position(i, j).map(|p| self.values[p])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.position(i, j).is_some()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, j).unwrap_or(0.0)).collect()
    }

    /// For each row `k`, the columns `j <= k` stored in that row (the
    /// strict upper triangle viewed column-wise, plus the diagonal).
    /// Returned as CSC of the upper triangle: `(col_ptr, row_idx, values)`.
    pub fn upper_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.n;
        let mut ptr = vec![0usize; n + 1];
        for &i in &self.row_idx {
            ptr[i + 1] += 1;
        }
        for k in 0..n {
            ptr[k + 1] += ptr[k];
        }
        let mut next = ptr.clone();
        let mut idx = vec![0usize; self.nnz()];
        let mut val = vec![0.0; self.nnz()];
        for j in 0..n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let q = next[i];
                idx[q] = j;
                val[q] = self.values[p];
                next[i] += 1;
            }
        }
        (ptr, idx, val)
    }

    /// `y = A x` using both triangles.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        Ok(y)
    }

    /// Full dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
            d[j][i] = v;
        }
        d
    }

    /// `P A P^T` restricted to its lower triangle.
    pub fn permute(&self, p: &Permutation) -> Result<Self> {
        if p.len() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: p.len(),
            });
        }
        let n = self.n;
        let inv = p.inverse_slice();
        let mut counts = vec![0usize; n + 1];
        for (i, j, _) in self.iter() {
            let (a, b) = (inv[i], inv[j]);
            counts[a.min(b) + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            let q = next[c];
            row_idx[q] = r;
            values[q] = v;
            next[c] += 1;
        }
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..n {
            let (s, e) = (col_ptr[c], col_ptr[c + 1]);
            if row_idx[s..e].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            scratch.clear();
            scratch.extend(row_idx[s..e].iter().copied().zip(values[s..e].iter().copied()));
            scratch.sort_unstable_by_key(|&(r, _)| r);
            for (k, &(r, v)) in scratch.iter().enumerate() {
                row_idx[s + k] = r;
                values[s + k] = v;
            }
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// True iff every structural entry of `self` is structural in `other`.
    pub fn is_subpattern_of(&self, other: &SparseSymmetric) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: other.n,
                got: self.n,
            });
        }
        for j in 0..self.n {
            let outer = other.col_rows(j);
            let mut k = 0;
            for &i in self.col_rows(j) {
                while k < outer.len() && outer[k] < i {
                    k += 1;
                }
                if k == outer.len() || outer[k] != i {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Same pattern, every value multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }
}

/// `P A P^T` restricted to the lower triangle.
pub fn permute_symmetric(a: &SparseSymmetric, p: &Permutation) -> Result<SparseSymmetric> {
    a.permute(p)
}

/// True iff every structural entry of `b` is a structural entry of `a`.
pub fn is_subpattern(b: &SparseSymmetric, a: &SparseSymmetric) -> Result<bool> {
    b.is_subpattern_of(a)
}
