//! Reproducible test problems: structured matrices, random sparse SPD
//! matrices and small random mixed-model datasets.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Factor, MixedModelDataset};
use crate::error::Result;
use crate::sparse::{SparseSymmetric, TripletList};

/// Five-point Laplacian on a `k x k` grid, row-major numbering.
pub fn grid_laplacian(k: usize) -> SparseSymmetric {
    let n = k * k;
    let mut t = TripletList::with_capacity(n, 3 * n);
    for r in 0..k {
        for c in 0..k {
            let i = r * k + c;
            t.push(i, i, 4.0);
            if c + 1 < k {
                t.push(i + 1, i, -1.0);
            }
            if r + 1 < k {
                t.push(i + k, i, -1.0);
            }
        }
    }
    SparseSymmetric::from_triplets(&t).expect("valid grid")
}

/// Arrowhead with the dense row and column first.
pub fn arrowhead(n: usize) -> SparseSymmetric {
    let mut t = TripletList::with_capacity(n, 2 * n);
    t.push(0, 0, n as f64);
    for i in 1..n {
        t.push(i, i, 2.0);
        t.push(i, 0, 1.0);
    }
    SparseSymmetric::from_triplets(&t).expect("valid arrowhead")
}

/// `[-1, 2, -1]` tridiagonal.
pub fn tridiagonal(n: usize) -> SparseSymmetric {
    let mut t = TripletList::with_capacity(n, 2 * n);
    for i in 0..n {
        t.push(i, i, 2.0);
        if i + 1 < n {
            t.push(i + 1, i, -1.0);
        }
    }
    SparseSymmetric::from_triplets(&t).expect("valid tridiagonal")
}

/// Random sparse symmetric positive definite matrix with about `per_col`
/// off-diagonal entries per column, bounded condition number.
///
/// Off-diagonal values are uniform in `[-1, 1]`; the diagonal is the absolute
/// row sum plus a shift `s`, so the spectrum lies in `[s, 2 R + s]` where `R`
/// is the largest absolute row sum. `s` is chosen so that `(2R + s) / s` does
/// not exceed `max_cond`.
pub fn random_spd(n: usize, per_col: f64, max_cond: f64, seed: u64) -> SparseSymmetric {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = if n > 1 { (per_col / (n - 1) as f64).min(1.0) } else { 0.0 };
    let mut off = Vec::new();
    let mut rowsum = vec![0.0f64; n];
    for j in 0..n {
        for i in j + 1..n {
            if rng.random::<f64>() < p {
                let v = rng.random_range(-1.0..1.0);
                off.push((i, j, v));
                rowsum[i] += f64::abs(v);
                rowsum[j] += f64::abs(v);
            }
        }
    }
    let r = rowsum.iter().cloned().fold(1.0, f64::max);
    let min_shift = 2.0 * r / (max_cond - 1.0);
    // log-uniform between the conditioning floor and r
    let u: f64 = rng.random();
    let shift = min_shift * (r / min_shift).powf(u);
    let mut t = TripletList::with_capacity(n, n + off.len());
    for (i, &s) in rowsum.iter().enumerate() {
        t.push(i, i, s + shift);
    }
    for (i, j, v) in off {
        t.push(i, j, v);
    }
    SparseSymmetric::from_triplets(&t).expect("valid random matrix")
}

/// Small random dataset: intercept plus an optional covariate, one to three
/// random factors and one or two residual blocks, with at most `max_n`
/// observations.
pub fn random_dataset(max_n: usize, seed: u64) -> Result<MixedModelDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(max_n.min(8)..=max_n);
    let nf = rng.random_range(1..=3);
    let mut random = Vec::with_capacity(nf);
    for f in 0..nf {
        let levels = rng.random_range(2..=(n / 3).max(2));
        // every level observed at least once
        let mut labels: Vec<String> = (0..n).map(|o| format!("L{}", o % levels)).collect();
        for l in labels.iter_mut().skip(levels) {
            *l = format!("L{}", rng.random_range(0..levels));
        }
        random.push(Factor::from_labels(format!("f{f}"), &labels));
    }
    let two_blocks = n >= 4 && rng.random::<bool>();
    let resid: Vec<&str> = (0..n)
        .map(|o| if two_blocks && o % 2 == 1 { "r2" } else { "r1" })
        .collect();
    let covariate = rng.random::<bool>();
    let p = if covariate { 2 } else { 1 };
    let mut x = DMatrix::from_element(n, p, 1.0);
    let mut names = vec!["(Intercept)".to_string()];
    if covariate {
        for o in 0..n {
            x[(o, 1)] = rng.random_range(-2.0..2.0);
        }
        names.push("x".into());
    }
    let y = (0..n).map(|_| rng.random_range(-3.0..3.0) + 5.0).collect();
    MixedModelDataset::new(y, x, names, random, Factor::from_labels("resid", &resid))
}
