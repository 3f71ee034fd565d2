//! Sparse symmetric `LDL^T` factorization, selected inversion and
//! log-determinant derivatives, applied to restricted likelihoods of linear
//! mixed models.
//!
//! The usual chain is
//! [`ordering::amd_order`] → [`symbolic::symbolic_factor`] →
//! [`numeric::ldlt_factorize`] → [`selinv::selected_inverse`], after which
//! traces `tr(C^{-1} B)` for any `B` on the pattern of `C` cost one pass over
//! the entries of `B`.

pub mod bench;
pub mod datagen;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod gallery;
pub mod mm;
pub mod numeric;
pub mod ordering;
pub mod pipeline;
pub mod reml;
pub mod selinv;
pub mod sparse;
pub mod symbolic;

pub use error::{Error, Result};
pub use numeric::{ldlt_factorize, LdlFactor, LdlOptions};
pub use ordering::{amd_order, natural_order, Ordering};
pub use selinv::{selected_inverse, SelectedInverse};
pub use sparse::{Permutation, SparseSymmetric, TripletList};
pub use symbolic::{symbolic_factor, FlopCounts, SymbolicFactor};
