//! Ordering, analysis, factorization and selected inversion in one pass,
//! with per-phase wall times.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::numeric::{ldlt_factorize_with, LdlFactor, LdlOptions};
use crate::ordering::Ordering;
use crate::selinv::{selected_inverse, SelectedInverse};
use crate::sparse::SparseSymmetric;
use crate::symbolic::{symbolic_factor, SymbolicFactor};

#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimes {
    pub ordering: Duration,
    pub symbolic: Duration,
    pub factor: Duration,
    pub selinv: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.ordering + self.symbolic + self.factor + self.selinv
    }
}

/// Runs ordering and symbolic analysis.
pub fn analyze(a: &SparseSymmetric, ordering: &Ordering) -> Result<(SymbolicFactor, PhaseTimes)> {
    let mut times = PhaseTimes::default();
    let t = Instant::now();
    let perm = ordering.compute(a)?;
    times.ordering = t.elapsed();
    let t = Instant::now();
    let sym = symbolic_factor(a, &perm)?;
    times.symbolic = t.elapsed();
    Ok((sym, times))
}

/// Analysis followed by numeric factorization.
pub fn factorize(
    a: &SparseSymmetric,
    ordering: &Ordering,
    opts: &LdlOptions,
) -> Result<(LdlFactor, PhaseTimes)> {
    let (sym, mut times) = analyze(a, ordering)?;
    let t = Instant::now();
    let f = ldlt_factorize_with(a, &sym, opts)?;
    times.factor = t.elapsed();
    Ok((f, times))
}

/// The full chain up to the selected inverse.
pub fn factorize_and_invert(
    a: &SparseSymmetric,
    ordering: &Ordering,
    opts: &LdlOptions,
) -> Result<(LdlFactor, SelectedInverse, PhaseTimes)> {
    let (f, mut times) = factorize(a, ordering, opts)?;
    let t = Instant::now();
    let z = selected_inverse(&f);
    times.selinv = t.elapsed();
    Ok((f, z, times))
}
