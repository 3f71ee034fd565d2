#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use seldet_core::gallery::random_spd;
use seldet_core::mm::{read_matrix_market, write_matrix_market};
use seldet_core::reml::trace_product;
use seldet_core::symbolic::{elimination_tree, postorder};
use seldet_core::{
    amd_order, ldlt_factorize, selected_inverse, symbolic_factor, Permutation, SparseSymmetric, TripletList,
};

use common::*;

fn matrix() -> impl Strategy<Value = SparseSymmetric> {
    (1usize..60, 0.0f64..5.0, any::<u64>()).prop_map(|(n, per_col, seed)| random_spd(n, per_col, 1e5, seed))
}

fn perm(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::from_vec(v).unwrap())
}

fn matrix_and_perm() -> impl Strategy<Value = (SparseSymmetric, Permutation)> {
    matrix().prop_flat_map(|a| {
        let n = a.n();
        (Just(a), perm(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_inverse_round_trips(p in (1usize..40).prop_flat_map(perm)) {
        let x: Vec<usize> = (0..p.len()).map(|i| i * 7 + 1).collect();
        prop_assert_eq!(p.apply_inverse(&p.apply(&x)), x.clone());
        prop_assert_eq!(p.inverse().inverse(), p.clone());
        prop_assert_eq!(a_perm_identity(&p), true);
    }

    #[test]
    fn permuted_entries_move((a, p) in matrix_and_perm()) {
        let b = a.permute(&p).unwrap();
        let inv = p.inverse_slice();
        prop_assert_eq!(b.nnz(), a.nnz());
        for (i, j, v) in a.iter() {
            prop_assert_eq!(b.get(inv[i], inv[j]), Some(v));
        }
    }

    #[test]
    fn symbolic_pattern_equals_dense_fill((a, p) in matrix_and_perm()) {
        let s = symbolic_factor(&a, &p).unwrap();
        let fill = dense_fill(&a, &p);
        for j in 0..a.n() {
            let expect: Vec<usize> = (j + 1..a.n()).filter(|&i| fill[i][j]).collect();
            prop_assert_eq!(s.col_pattern(j), expect.as_slice());
        }
        let (ldlt, selinv) = flops_from_counts(&dense_col_counts(&a, &p));
        prop_assert_eq!(s.flops().ldlt, ldlt);
        prop_assert_eq!(s.flops().selinv, selinv);
    }

    #[test]
    fn etree_parent_is_first_subdiagonal(a in matrix()) {
        let parent = elimination_tree(&a);
        let fill = dense_fill(&a, &Permutation::identity(a.n()));
        for j in 0..a.n() {
            let first = (j + 1..a.n()).find(|&i| fill[i][j]);
            prop_assert_eq!(parent[j], first);
        }
        let post = postorder(&parent).unwrap();
        // children precede parents
        let pos = post.inverse_slice();
        for (j, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                prop_assert!(pos[j] < pos[*p]);
            }
        }
    }

    #[test]
    fn amd_is_a_permutation_and_deterministic(a in matrix()) {
        let p = amd_order(&a);
        prop_assert_eq!(p.len(), a.n());
        prop_assert_eq!(amd_order(&a), p);
    }

    #[test]
    fn factor_solves_and_inverse_matches((a, p) in matrix_and_perm()) {
        let s = symbolic_factor(&a, &p).unwrap();
        let f = ldlt_factorize(&a, &s).unwrap();
        let x0: Vec<f64> = (0..a.n()).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&a.mul_vec(&x0).unwrap()).unwrap();
        for (u, v) in x.iter().zip(&x0) {
            prop_assert!((u - v).abs() <= 1e-8 * v.abs().max(1.0));
        }
        let z = selected_inverse(&f);
        prop_assert_eq!(f.flops(), s.flops().ldlt);
        prop_assert_eq!(z.flops(), s.flops().selinv);
        let zd = dense_inverse(&a);
        for j in 0..a.n() {
            for i in j..a.n() {
                if let Some(v) = z.get_entry(i, j).unwrap() {
                    prop_assert!(rel(v, zd[(i, j)]) <= 1e-9, "({}, {}) {} vs {}", i, j, v, zd[(i, j)]);
                }
            }
        }
        prop_assert!(rel(f.log_det(), dense_logdet(&a)) <= 1e-10 || (f.log_det() - dense_logdet(&a)).abs() < 1e-10);
    }

    #[test]
    fn trace_of_subpattern_matches_dense((a, p) in matrix_and_perm(), w in any::<u64>()) {
        // B shares a pseudo-random subset of the entries of A
        let mut t = TripletList::new(a.n());
        for (k, (i, j, _)) in a.iter().enumerate() {
            if (w >> (k % 64)) & 1 == 1 || i == j {
                t.push(i, j, 1.0 + k as f64 * 0.25);
            }
        }
        let b = SparseSymmetric::from_triplets(&t).unwrap();
        let s = symbolic_factor(&a, &p).unwrap();
        let z = selected_inverse(&ldlt_factorize(&a, &s).unwrap());
        let got = trace_product(&z, &b).unwrap();
        let expect = (dense_inverse(&a) * dense(&b)).trace();
        prop_assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        let tr = trace_product(&z, &a).unwrap();
        prop_assert!((tr - a.n() as f64).abs() <= 1e-9 * a.n() as f64);
    }

    #[test]
    fn matrix_market_round_trip(a in matrix()) {
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        prop_assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), a);
    }
}

fn a_perm_identity(p: &Permutation) -> bool {
    let n = p.len();
    let inv = p.inverse_slice();
    (0..n).all(|i| p.as_slice()[inv[i]] == i)
}
