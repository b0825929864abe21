mod common;

use common::oracle::collisions;
use common::rng;
use lcgm_core::dictionary::{
    check_sparsity_preserving_is_genperm, incoherence_spark_bound, is_injective_on_sparse,
    match_scale_permutation, mutual_incoherence, omp, sample_exact_sparsity, spark_bruteforce_exact,
    spark_report, Dictionary, Injectivity, DEFAULT_RANK_TOL,
};
use lcgm_core::numeric::ratio;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn small_integer_matrix(r: &mut impl Rng, p: usize, d: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(p, d, |_, _| r.random_range(-1i32..=1) as f64);
        if m.column_iter().all(|c| c.norm() > 0.0) {
            return m;
        }
    }
}

fn generalized_permutation(r: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let mut t = DMatrix::zeros(d, d);
    for (j, &i) in perm.iter().enumerate() {
        let scale: f64 = r.random_range(0.5..2.0);
        t[(i, j)] = if r.random_bool(0.5) { scale } else { -scale };
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn spark_dominates_the_incoherence_bound(seed: u64, p in 1usize..8, d in 1usize..10, integer: bool) {
        let mut r = rng(seed);
        let m = if integer { small_integer_matrix(&mut r, p, d) } else { Dictionary::random_gaussian(p, d, &mut r).into_matrix() };
        let g = Dictionary::new(m.clone()).unwrap();
        let report = spark_report(&g, Some(d), DEFAULT_RANK_TOL).unwrap();
        let spark = report.exact_spark.unwrap();
        prop_assert!(spark >= incoherence_spark_bound(mutual_incoherence(&g).unwrap(), d));
        prop_assert!(spark <= p + 1);
        if integer {
            let rows: Vec<Vec<_>> = m.row_iter().map(|row| row.iter().map(|&x| ratio(x as i64, 1)).collect()).collect();
            prop_assert_eq!(spark_bruteforce_exact(&rows, d).unwrap_or(d + 1), spark);
        }
    }

    #[test]
    fn injectivity_verdicts_agree_with_collisions(seed: u64, p in 2usize..7, d in 2usize..9, integer: bool, s in 1usize..4) {
        let mut r = rng(seed);
        let m = if integer { small_integer_matrix(&mut r, p, d) } else { Dictionary::random_gaussian(p, d, &mut r).into_matrix() };
        let g = Dictionary::new(m).unwrap();
        let report = spark_report(&g, Some(d), DEFAULT_RANK_TOL).unwrap();
        let found = collisions(&g, s, 300, &mut r);
        match is_injective_on_sparse(&report, s) {
            Injectivity::Injective => prop_assert_eq!(found, 0),
            Injectivity::NotInjective => prop_assert!(2 * s >= report.exact_spark.unwrap()),
            Injectivity::Unknown => prop_assert!(false, "exact spark was computed"),
        }
    }

    #[test]
    fn omp_recovers_supports_under_low_coherence(seed: u64, s in 1usize..3) {
        let mut r = rng(seed);
        let (g, mu) = loop {
            let g = Dictionary::random_gaussian(40, 10, &mut r);
            let mu = mutual_incoherence(&g).unwrap();
            if (2 * s - 1) as f64 * mu < 1.0 {
                break (g, mu);
            }
        };
        prop_assert!((2 * s - 1) as f64 * mu < 1.0);
        for c in sample_exact_sparsity(10, s, 20, &mut r) {
            let z = g.apply(&c).unwrap();
            let got = omp(&g, &z, s, 1e-12).unwrap();
            prop_assert_eq!(got.code.support(), c.support());
        }
    }

    #[test]
    fn scale_permutation_witnesses_invert(seed: u64, p in 2usize..8, d in 1usize..8) {
        let mut r = rng(seed);
        let g = Dictionary::random_gaussian(p, d, &mut r);
        let g2 = Dictionary::new(g.matrix() * generalized_permutation(&mut r, d)).unwrap();
        let w = match_scale_permutation(&g, &g2, 1e-9).unwrap().expect("planted witness");
        prop_assert!(w.max_relative_error(&g, &g2) <= 1e-9);
        prop_assert!(w.inverse().max_relative_error(&g2, &g) <= 1e-9);
        prop_assert!(match_scale_permutation(&g2, &g, 1e-9).unwrap().is_some());
    }

    #[test]
    fn generalized_permutations_are_exactly_the_matched_ones(seed: u64, d in 2usize..5, kind in 0u8..3) {
        let mut r = rng(seed);
        let t = match kind {
            0 => generalized_permutation(&mut r, d),
            1 => {
                let mut t = generalized_permutation(&mut r, d);
                let (i, j) = (r.random_range(0..d), r.random_range(0..d));
                t[(i, j)] += 0.5;
                t
            }
            _ => DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0)),
        };
        prop_assume!(t.clone().svd(false, false).singular_values.min() > 1e-6);
        let one_sparse = t.column_iter().all(|c| c.iter().filter(|x| x.abs() > 1e-12).count() == 1);
        let identity = Dictionary::new(DMatrix::identity(d, d)).unwrap();
        let matched = match_scale_permutation(&identity, &Dictionary::new(t.clone()).unwrap(), 1e-9).unwrap().is_some();
        prop_assert_eq!(one_sparse, matched);
        let diag = check_sparsity_preserving_is_genperm(&t, 1, 1e-9, 20, seed).unwrap();
        prop_assert_eq!(diag.is_generalized_permutation, one_sparse);
        prop_assert!(diag.implication_held);
    }
}

#[test]
fn duplicated_columns_have_spark_two() {
    let mut r = rng(11);
    for d in 2..8 {
        let mut m = Dictionary::random_gaussian(5, d, &mut r).into_matrix();
        let (a, b) = (r.random_range(0..d), r.random_range(0..d));
        if a != b {
            let col = m.column(a) * -3.0;
            m.set_column(b, &col);
        } else {
            continue;
        }
        let g = Dictionary::new(m).unwrap();
        assert_eq!(spark_report(&g, None, DEFAULT_RANK_TOL).unwrap().exact_spark, Some(2));
        assert!(collisions(&g, 1, 2000, &mut r) > 0);
    }
}
