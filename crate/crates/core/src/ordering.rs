//! Fill-reducing symmetric orderings.
//!
//! [`amd_order`] is an approximate minimum degree ordering on the quotient
//! graph: element absorption (including aggressive absorption), mass
//! elimination, hash-based supervariable detection and dense-row deferral.
//! The final order is a postorder of the assembly tree.

use std::collections::BTreeSet;
use std::io::Read;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sparse::{Permutation, SparseSymmetric};

const EMPTY: isize = -1;

#[inline]
fn flip(i: isize) -> isize {
    -i - 2
}

/// Which permutation to apply before factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    Amd,
    /// A permutation read from a file.
    File(String),
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Ordering::Natural),
            "amd" => Ok(Ordering::Amd),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(Ordering::File(path.to_string())),
                _ => Err(Error::ConfigInvalid(format!(
                    "unknown ordering {s:?} (expected natural, amd or file:<path>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ordering::Natural => write!(f, "natural"),
            Ordering::Amd => write!(f, "amd"),
            Ordering::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl Ordering {
    pub fn compute(&self, a: &SparseSymmetric) -> Result<Permutation> {
        match self {
            Ordering::Natural => Ok(natural_order(a.n())),
            Ordering::Amd => Ok(amd_order(a)),
            Ordering::File(path) => load_order(std::fs::File::open(path)?, a.n()),
        }
    }
}

pub fn natural_order(n: usize) -> Permutation {
    Permutation::identity(n)
}

/// Reads `n` whitespace-separated 0-based indices and validates them.
pub fn load_order<R: Read>(mut reader: R, n: usize) -> Result<Permutation> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut perm = Vec::with_capacity(n);
    for tok in text.split_whitespace() {
        let v: usize = tok
            .parse()
            .map_err(|_| Error::NotAPermutation(format!("bad index {tok:?}")))?;
        perm.push(v);
    }
    if perm.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: perm.len(),
        });
    }
    Permutation::from_vec(perm)
}

/// Dense threshold: nodes with more neighbours than this are ordered last.
fn dense_threshold(n: usize) -> isize {
    let t = ((10.0 * (n as f64).sqrt()) as isize).max(16);
    t.min(n as isize - 2)
}

/// Resets the `w` marks when `mark` would otherwise become invalid.
fn wclear(mark: isize, lemax: isize, w: &mut [isize], n: usize) -> isize {
    if mark < 2 || mark.checked_add(lemax).is_none() {
        for x in w.iter_mut().take(n) {
            if *x != 0 {
                *x = 1;
            }
        }
        return 2;
    }
    mark
}

/// Approximate minimum degree ordering of the pattern of `a`.
///
/// Among candidates of equal approximate degree the smallest index is
/// eliminated first, so the result is a pure function of the pattern.
#[allow(clippy::needless_range_loop)]
pub fn amd_order(a: &SparseSymmetric) -> Permutation {
    let n = a.n();
    if n == 0 {
        return Permutation::identity(0);
    }

    // Quotient graph storage: the adjacency of A + A' without the diagonal.
    let mut len = vec![0isize; n + 1];
    for (i, j, _) in a.iter() {
        if i != j {
            len[i] += 1;
            len[j] += 1;
        }
    }
    let mut cp = vec![0isize; n + 1];
    for k in 0..n {
        cp[k + 1] = cp[k] + len[k];
    }
    let mut cnz = cp[n] as usize;
    let mut ci = vec![0isize; cnz + cnz / 5 + 2 * n];
    {
        let mut fill: Vec<usize> = cp[..n].iter().map(|&p| p as usize).collect();
        for (i, j, _) in a.iter() {
            if i != j {
                ci[fill[i]] = j as isize;
                fill[i] += 1;
                ci[fill[j]] = i as isize;
                fill[j] += 1;
            }
        }
    }

    let dense = dense_threshold(n);
    let mut nv = vec![1isize; n + 1];
    let mut next = vec![EMPTY; n + 1];
    let mut last = vec![EMPTY; n + 1];
    let mut hhead = vec![EMPTY; n + 1];
    let mut elen = vec![0isize; n + 1];
    let mut degree = len.clone();
    let mut w = vec![1isize; n + 1];
    let mut degree_lists: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];

    let mut mark = wclear(0, 0, &mut w, n);
    elen[n] = -2;
    cp[n] = -1;
    w[n] = 0;

    let mut nel: isize = 0;
    for i in 0..n {
        let d = degree[i];
        if d == 0 {
            elen[i] = -2;
            nel += 1;
            cp[i] = -1;
            w[i] = 0;
        } else if d > dense {
            nv[i] = 0;
            elen[i] = -1;
            nel += 1;
            cp[i] = flip(n as isize);
            nv[n] += 1;
        } else {
            degree_lists[d as usize].insert(i);
        }
    }

    let mut mindeg = 0usize;
    let mut lemax: isize = 0;
    while nel < n as isize {
        // pivot of minimum approximate degree, smallest index first
        while mindeg < n && degree_lists[mindeg].is_empty() {
            mindeg += 1;
        }
        let k = degree_lists[mindeg]
            .pop_first()
            .expect("a live variable remains while nel < n");
        let elenk = elen[k];
        let mut nvk = nv[k];
        nel += nvk;

        // garbage collection
        if elenk > 0 && cnz + mindeg >= ci.len() {
            for j in 0..n {
                let p = cp[j];
                if p >= 0 {
                    cp[j] = ci[p as usize];
                    ci[p as usize] = flip(j as isize);
                }
            }
            let (mut q, mut p) = (0usize, 0usize);
            while p < cnz {
                let j = flip(ci[p]);
                p += 1;
                if j >= 0 {
                    let j = j as usize;
                    ci[q] = cp[j];
                    cp[j] = q as isize;
                    q += 1;
                    for _ in 1..len[j] {
                        ci[q] = ci[p];
                        q += 1;
                        p += 1;
                    }
                }
            }
            cnz = q;
            if cnz + mindeg >= ci.len() {
                ci.resize(cnz + mindeg + n + 1, 0);
            }
        }

        // construct the new element Lk
        let mut dk: isize = 0;
        nv[k] = -nvk;
        let mut p = cp[k] as usize;
        let pk1 = if elenk == 0 { p } else { cnz };
        let mut pk2 = pk1;
        for k1 in 1..=(elenk + 1) {
            let (e, mut pj, ln) = if k1 > elenk {
                (k, p, len[k] - elenk)
            } else {
                let e = ci[p] as usize;
                p += 1;
                (e, cp[e] as usize, len[e])
            };
            for _ in 0..ln {
                let i = ci[pj] as usize;
                pj += 1;
                let nvi = nv[i];
                if nvi <= 0 {
                    continue;
                }
                dk += nvi;
                nv[i] = -nvi;
                ci[pk2] = i as isize;
                pk2 += 1;
                let removed = degree_lists[degree[i] as usize].remove(&i);
                debug_assert!(removed);
            }
            if e != k {
                cp[e] = flip(k as isize);
                w[e] = 0;
            }
        }
        if elenk != 0 {
            cnz = pk2;
        }
        degree[k] = dk;
        cp[k] = pk1 as isize;
        len[k] = (pk2 - pk1) as isize;
        elen[k] = -2;

        // set differences |Le \ Lk| for every element e adjacent to Lk
        mark = wclear(mark, lemax, &mut w, n);
        for pk in pk1..pk2 {
            let i = ci[pk] as usize;
            let eln = elen[i];
            if eln <= 0 {
                continue;
            }
            let nvi = -nv[i];
            let wnvi = mark - nvi;
            let start = cp[i] as usize;
            for &e in &ci[start..start + eln as usize] {
                let e = e as usize;
                if w[e] >= mark {
                    w[e] -= nvi;
                } else if w[e] != 0 {
                    w[e] = degree[e] + wnvi;
                }
            }
        }

        // approximate degree update, element pruning and hashing
        for pk in pk1..pk2 {
            let i = ci[pk] as usize;
            let p1 = cp[i] as usize;
            let p2 = p1 + elen[i] as usize; // one past the element list
            let mut pn = p1;
            let mut h: usize = 0;
            let mut d: isize = 0;
            for p in p1..p2 {
                let e = ci[p] as usize;
                if w[e] != 0 {
                    let dext = w[e] - mark;
                    if dext > 0 {
                        d += dext;
                        ci[pn] = e as isize;
                        pn += 1;
                        h = h.wrapping_add(e);
                    } else {
                        // aggressive absorption
                        cp[e] = flip(k as isize);
                        w[e] = 0;
                    }
                }
            }
            elen[i] = (pn - p1 + 1) as isize;
            let p3 = pn;
            let p4 = p1 + len[i] as usize;
            for p in p2..p4 {
                let j = ci[p] as usize;
                let nvj = nv[j];
                if nvj <= 0 {
                    continue;
                }
                d += nvj;
                ci[pn] = j as isize;
                pn += 1;
                h = h.wrapping_add(j);
            }
            if d == 0 {
                // mass elimination
                cp[i] = flip(k as isize);
                let nvi = -nv[i];
                dk -= nvi;
                nvk += nvi;
                nel += nvi;
                nv[i] = 0;
                elen[i] = -1;
            } else {
                degree[i] = degree[i].min(d);
                ci[pn] = ci[p3];
                ci[p3] = ci[p1];
                ci[p1] = k as isize;
                len[i] = (pn - p1 + 1) as isize;
                let h = h % n;
                next[i] = hhead[h];
                hhead[h] = i as isize;
                last[i] = h as isize;
            }
        }
        degree[k] = dk;
        lemax = lemax.max(dk);
        mark = wclear(mark + lemax, lemax, &mut w, n);

        // supervariable detection
        for pk in pk1..pk2 {
            let i0 = ci[pk] as usize;
            if nv[i0] >= 0 {
                continue;
            }
            let h = last[i0] as usize;
            let mut i = hhead[h];
            hhead[h] = EMPTY;
            while i != EMPTY && next[i as usize] != EMPTY {
                let iu = i as usize;
                let ln = len[iu];
                let eln = elen[iu];
                let start = cp[iu] as usize;
                for &x in &ci[start + 1..start + ln as usize] {
                    w[x as usize] = mark;
                }
                let mut jlast = iu;
                let mut j = next[iu];
                while j != EMPTY {
                    let ju = j as usize;
                    let js = cp[ju] as usize;
                    let ok = len[ju] == ln
                        && elen[ju] == eln
                        && ci[js + 1..js + ln as usize].iter().all(|&x| w[x as usize] == mark);
                    if ok {
                        cp[ju] = flip(iu as isize);
                        nv[iu] += nv[ju];
                        nv[ju] = 0;
                        elen[ju] = -1;
                        j = next[ju];
                        next[jlast] = j;
                    } else {
                        jlast = ju;
                        j = next[ju];
                    }
                }
                i = next[iu];
                mark += 1;
            }
        }

        // finalize Lk and reinsert its variables
        let mut p = pk1;
        for pk in pk1..pk2 {
            let i = ci[pk] as usize;
            let nvi = -nv[i];
            if nvi <= 0 {
                continue;
            }
            nv[i] = nvi;
            let d = (degree[i] + dk - nvi).min(n as isize - nel - nvi);
            degree_lists[d as usize].insert(i);
            mindeg = mindeg.min(d as usize);
            degree[i] = d;
            ci[p] = i as isize;
            p += 1;
        }
        nv[k] = nvk;
        len[k] = (p - pk1) as isize;
        if len[k] == 0 {
            cp[k] = -1;
            w[k] = 0;
        }
        if elenk != 0 {
            cnz = p;
        }
    }

    // postorder the assembly tree
    for x in cp.iter_mut().take(n) {
        *x = flip(*x);
    }
    let mut head = vec![EMPTY; n + 1];
    let mut sibling = vec![EMPTY; n + 1];
    for j in (0..=n).rev() {
        if nv[j] > 0 || cp[j] < 0 {
            continue;
        }
        let parent = cp[j] as usize;
        sibling[j] = head[parent];
        head[parent] = j as isize;
    }
    for e in (0..=n).rev() {
        if nv[e] <= 0 || cp[e] == EMPTY {
            continue;
        }
        let parent = cp[e] as usize;
        sibling[e] = head[parent];
        head[parent] = e as isize;
    }
    let mut order = Vec::with_capacity(n + 1);
    let mut stack = Vec::new();
    for root in 0..=n {
        if cp[root] != EMPTY {
            continue;
        }
        stack.push(root);
        while let Some(&top) = stack.last() {
            let child = head[top];
            if child == EMPTY {
                stack.pop();
                order.push(top);
            } else {
                head[top] = sibling[child as usize];
                stack.push(child as usize);
            }
        }
    }
    order.retain(|&i| i < n);
    Permutation::from_vec(order).expect("assembly tree postorder visits every node once")
}
