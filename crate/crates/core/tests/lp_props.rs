mod common;

use common::rng;
use lcgm_core::lp::{solve_feasibility, FeasibilityStatus, FeasibilitySystem};
use lcgm_core::numeric::ratio;
use lcgm_core::Rational;
use proptest::prelude::*;
use rand::Rng;

fn planted_system(seed: u64, vars: usize, rows: usize) -> (FeasibilitySystem, Vec<Rational>) {
    let mut r = rng(seed);
    let x: Vec<Rational> = (0..vars).map(|_| ratio(r.random_range(0..5), r.random_range(1..4))).collect();
    let mut sys = FeasibilitySystem::new(vars).all_nonneg();
    for _ in 0..rows {
        let row: Vec<Rational> = (0..vars).map(|_| ratio(r.random_range(-3..4), 1)).collect();
        let rhs = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        sys.add_equality(row, rhs);
    }
    (sys, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn planted_systems_are_feasible(seed: u64, vars in 1usize..7, rows in 0usize..7) {
        let (sys, x) = planted_system(seed, vars, rows);
        prop_assert!(sys.is_satisfied_by(&x));
        let res = solve_feasibility(&sys).unwrap();
        prop_assert!(res.pivots <= 10 * (vars + rows));
        let w = res.witness();
        prop_assert!(w.is_some());
        prop_assert!(sys.is_satisfied_by(w.unwrap()));
    }

    #[test]
    fn every_verdict_carries_a_checkable_certificate(seed: u64, vars in 1usize..6, rows in 1usize..6) {
        let mut r = rng(seed);
        let mut sys = FeasibilitySystem::new(vars).all_nonneg();
        for _ in 0..rows {
            let row = (0..vars).map(|_| ratio(r.random_range(-3..4), 1)).collect();
            sys.add_equality(row, ratio(r.random_range(-4..5), 1));
        }
        let res = solve_feasibility(&sys).unwrap();
        prop_assert!(res.pivots <= 10 * (vars + rows));
        match res.status {
            FeasibilityStatus::Feasible(x) => prop_assert!(sys.is_satisfied_by(&x)),
            FeasibilityStatus::Infeasible(y) => {
                let y = y.expect("all-nonnegative systems always get a certificate");
                prop_assert!(sys.is_farkas_certificate(&y));
            }
        }
    }
}
