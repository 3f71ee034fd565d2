//! Structure-only analysis: elimination tree, postorder, column counts and
//! the nonzero pattern of `L`, all under the no-cancellation convention.

use crate::error::{Error, Result};
use crate::sparse::{Permutation, SparseSymmetric};

const NONE: usize = usize::MAX;

/// Predicted floating point operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopCounts {
    pub ldlt: u64,
    pub selinv: u64,
}

/// Output of [`symbolic_factor`].
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    n: usize,
    perm: Permutation,
    parent: Vec<Option<usize>>,
    col_counts: Vec<usize>,
    /// Strictly-lower pattern of `L`; the unit diagonal is implicit.
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    a_nnz: usize,
}

impl SymbolicFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// `m_i`, the number of nonzeros in column `i` of `L` including the diagonal.
    pub fn col_counts(&self) -> &[usize] {
        &self.col_counts
    }

    pub fn l_col_ptr(&self) -> &[usize] {
        &self.l_col_ptr
    }

    pub fn l_row_idx(&self) -> &[usize] {
        &self.l_row_idx
    }

    /// Strictly-lower row indices of column `j` of `L`.
    pub fn col_pattern(&self, j: usize) -> &[usize] {
        &self.l_row_idx[self.l_col_ptr[j]..self.l_col_ptr[j + 1]]
    }

    /// Nonzeros of `L` including the diagonal (`sum m_i`).
    pub fn nnz_l(&self) -> usize {
        self.n + self.l_row_idx.len()
    }

    /// Number of stored entries of the matrix this analysis was computed from.
    pub fn source_nnz(&self) -> usize {
        self.a_nnz
    }

    pub fn flops(&self) -> FlopCounts {
        predict_flops(self)
    }

    /// Number of nodes on the longest leaf-to-root path.
    pub fn tree_height(&self) -> usize {
        self.depths().into_iter().max().map_or(0, |d| d + 1)
    }

    /// Largest number of tree nodes sharing a depth.
    pub fn tree_max_width(&self) -> usize {
        let depths = self.depths();
        let mut hist = vec![0usize; depths.iter().max().map_or(0, |d| d + 1)];
        for d in depths {
            hist[d] += 1;
        }
        hist.into_iter().max().unwrap_or(0)
    }

    fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.n];
        for i in (0..self.n).rev() {
            if let Some(p) = self.parent[i] {
                depth[i] = depth[p] + 1;
            }
        }
        depth
    }
}

/// Elimination tree of a (permuted) symmetric matrix, by the path-compressed
/// ancestor scan. Works on the pattern only.
pub fn elimination_tree(a: &SparseSymmetric) -> Vec<Option<usize>> {
    let n = a.n();
    let (up_ptr, up_idx, _) = a.upper_csc();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &j in &up_idx[up_ptr[k]..up_ptr[k + 1]] {
            let mut i = j;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent.into_iter().map(|p| (p != NONE).then_some(p)).collect()
}

/// Postorder of a forest: every node follows all of its descendants and
/// children are visited in ascending order.
pub fn postorder(parent: &[Option<usize>]) -> Result<Permutation> {
    let n = parent.len();
    let mut head = vec![NONE; n];
    let mut sibling = vec![NONE; n];
    for j in (0..n).rev() {
        if let Some(p) = parent[j] {
            if p >= n {
                return Err(Error::IndexOutOfRange { row: p, col: j, n });
            }
            if p == j {
                return Err(Error::CycleDetected(j));
            }
            sibling[j] = head[p];
            head[p] = j;
        }
    }
    let mut post = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for root in (0..n).filter(|&j| parent[j].is_none()) {
        stack.push(root);
        while let Some(&top) = stack.last() {
            let child = head[top];
            if child == NONE {
                stack.pop();
                post.push(top);
            } else {
                head[top] = sibling[child];
                stack.push(child);
            }
        }
    }
    if post.len() != n {
        let mut seen = vec![false; n];
        post.iter().for_each(|&i| seen[i] = true);
        let stuck = seen.iter().position(|&s| !s).unwrap_or(0);
        return Err(Error::CycleDetected(stuck));
    }
    Permutation::from_vec(post)
}

/// Column counts of `L` by traversing the row subtrees of the elimination tree.
///
/// For each row `k`, the nonzeros `L[k, *]` are the nodes on the tree paths from
/// each `j` with `A[k, j] != 0` up to `k`.
pub fn column_counts(a: &SparseSymmetric, parent: &[Option<usize>]) -> Vec<usize> {
    let n = a.n();
    let (up_ptr, up_idx, _) = a.upper_csc();
    let mut counts = vec![1usize; n];
    let mut flag = vec![NONE; n];
    for k in 0..n {
        flag[k] = k;
        for &j in &up_idx[up_ptr[k]..up_ptr[k + 1]] {
            let mut i = j;
            while flag[i] != k {
                counts[i] += 1;
                flag[i] = k;
                match parent[i] {
                    Some(p) => i = p,
                    None => break,
                }
            }
        }
    }
    counts
}

/// Permutes `a` by `p` and computes the elimination tree, column counts and
/// the full pattern of `L`.
///
/// The pattern is built by merging each column of `A` with the patterns of
/// its elimination-tree children, independently of [`column_counts`]; the two
/// must agree.
pub fn symbolic_factor(a: &SparseSymmetric, p: &Permutation) -> Result<SymbolicFactor> {
    let ap = a.permute(p)?;
    let n = ap.n();
    let parent = elimination_tree(&ap);
    let col_counts = column_counts(&ap, &parent);

    let mut first_child = vec![NONE; n];
    let mut sibling = vec![NONE; n];
    for j in (0..n).rev() {
        if let Some(par) = parent[j] {
            sibling[j] = first_child[par];
            first_child[par] = j;
        }
    }

    let mut l_col_ptr = Vec::with_capacity(n + 1);
    l_col_ptr.push(0);
    let mut l_row_idx: Vec<usize> = Vec::with_capacity(col_counts.iter().sum::<usize>() - n);
    let mut marker = vec![NONE; n];
    for j in 0..n {
        let start = l_row_idx.len();
        marker[j] = j;
        for &i in ap.col_rows(j) {
            if i > j && marker[i] != j {
                marker[i] = j;
                l_row_idx.push(i);
            }
        }
        let mut c = first_child[j];
        while c != NONE {
            for q in l_col_ptr[c]..l_col_ptr[c + 1] {
                let i = l_row_idx[q];
                if i > j && marker[i] != j {
                    marker[i] = j;
                    l_row_idx.push(i);
                }
            }
            c = sibling[c];
        }
        l_row_idx[start..].sort_unstable();
        l_col_ptr.push(l_row_idx.len());
    }

    for j in 0..n {
        let m = l_col_ptr[j + 1] - l_col_ptr[j] + 1;
        if m != col_counts[j] {
            return Err(Error::PatternMismatch(format!(
                "column {j}: pattern has {m} entries, row-subtree count is {}",
                col_counts[j]
            )));
        }
    }

    Ok(SymbolicFactor {
        n,
        perm: p.clone(),
        parent,
        col_counts,
        l_col_ptr,
        l_row_idx,
        a_nnz: a.nnz(),
    })
}

/// `LDL^T` cost `sum m_i^2 - n` and selected-inversion cost
/// `2 (sum m_i^2 - n) - (sum m_i - n)`.
pub fn predict_flops(sym: &SymbolicFactor) -> FlopCounts {
    let n = sym.n as u64;
    let sum_sq: u64 = sym.col_counts.iter().map(|&m| (m as u64) * (m as u64)).sum();
    let ldlt = sum_sq - n;
    FlopCounts {
        ldlt,
        selinv: selinv_flops_from_ldlt(sym.n as u64, sym.nnz_l() as u64, ldlt),
    }
}

/// Selected-inversion cost from the factorization cost: twice the `LDL^T`
/// count minus the strictly-lower nonzeros of `L`.
pub fn selinv_flops_from_ldlt(n: u64, nnz_l: u64, ldlt_flops: u64) -> u64 {
    2 * ldlt_flops - (nnz_l - n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletList;

    fn tridiagonal(n: usize) -> SparseSymmetric {
        let mut t = TripletList::new(n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
        }
        SparseSymmetric::from_triplets(&t).unwrap()
    }

    fn dense(n: usize) -> SparseSymmetric {
        let mut t = TripletList::new(n);
        for i in 0..n {
            for j in 0..=i {
                t.push(i, j, if i == j { n as f64 } else { 1.0 });
            }
        }
        SparseSymmetric::from_triplets(&t).unwrap()
    }

    fn arrowhead(n: usize, hub: usize) -> SparseSymmetric {
        let mut t = TripletList::new(n);
        for i in 0..n {
            t.push(i, i, n as f64);
            if i != hub {
                t.push(i, hub, 1.0);
            }
        }
        SparseSymmetric::from_triplets(&t).unwrap()
    }

    #[test]
    fn etree_cases() {
        assert!(elimination_tree(&SparseSymmetric::identity(4)).iter().all(Option::is_none));
        assert_eq!(
            elimination_tree(&tridiagonal(4)),
            vec![Some(1), Some(2), Some(3), None]
        );
        let parent = elimination_tree(&arrowhead(6, 5));
        assert!(parent[..5].iter().all(|&p| p == Some(5)));
        assert_eq!(parent[5], None);
    }

    #[test]
    fn postorder_cases() {
        let chain = [Some(1), Some(2), None];
        assert_eq!(postorder(&chain).unwrap().as_slice(), &[0, 1, 2]);
        assert!(postorder(&[None, None, None]).unwrap().is_identity());
        let star = [Some(3), Some(3), Some(3), None];
        assert_eq!(postorder(&star).unwrap().as_slice(), &[0, 1, 2, 3]);
        let nested = [Some(2), Some(3), Some(3), None];
        assert_eq!(postorder(&nested).unwrap().as_slice(), &[1, 0, 2, 3]);
    }

    #[test]
    fn postorder_rejects_cycles() {
        assert!(matches!(postorder(&[Some(1), Some(0)]), Err(Error::CycleDetected(_))));
        assert!(matches!(postorder(&[Some(0)]), Err(Error::CycleDetected(0))));
        assert!(matches!(postorder(&[Some(5)]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn column_count_cases() {
        let id = SparseSymmetric::identity(5);
        assert_eq!(column_counts(&id, &elimination_tree(&id)), vec![1; 5]);
        let t = tridiagonal(4);
        assert_eq!(column_counts(&t, &elimination_tree(&t)), vec![2, 2, 2, 1]);
        let d = dense(3);
        assert_eq!(column_counts(&d, &elimination_tree(&d)), vec![3, 2, 1]);
    }

    #[test]
    fn symbolic_factor_cases() {
        let s = symbolic_factor(&SparseSymmetric::identity(5), &Permutation::identity(5)).unwrap();
        assert_eq!(s.nnz_l(), 5);
        assert!(s.l_row_idx().is_empty());

        let n = 9;
        let s = symbolic_factor(&arrowhead(n, 0), &Permutation::identity(n)).unwrap();
        assert_eq!(s.nnz_l(), n * (n + 1) / 2);

        let s = symbolic_factor(&tridiagonal(4), &Permutation::identity(4)).unwrap();
        assert_eq!(s.nnz_l(), 7);
        assert_eq!(s.col_pattern(0), &[1]);
        assert_eq!(s.tree_height(), 4);
        assert_eq!(s.tree_max_width(), 1);
    }

    #[test]
    fn flops_for_small_patterns() {
        let s = symbolic_factor(&SparseSymmetric::identity(5), &Permutation::identity(5)).unwrap();
        assert_eq!(predict_flops(&s), FlopCounts { ldlt: 0, selinv: 0 });
        // m = [2, 2, 2, 1]: sum m^2 - n = 13 - 4, then 2 * 9 - (7 - 4)
        let s = symbolic_factor(&tridiagonal(4), &Permutation::identity(4)).unwrap();
        assert_eq!(predict_flops(&s), FlopCounts { ldlt: 9, selinv: 15 });
    }

    #[test]
    fn flop_identity_on_published_counts() {
        assert_eq!(selinv_flops_from_ldlt(4796, 172023, 17175555), 34183883);
        assert_eq!(selinv_flops_from_ldlt(1806, 109078, 9137434), 18167596);
    }

    #[test]
    fn size_mismatch() {
        assert!(matches!(
            symbolic_factor(&tridiagonal(3), &Permutation::identity(4)),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
