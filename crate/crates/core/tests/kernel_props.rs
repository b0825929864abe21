mod common;

use common::*;
use lcgm_core::kernel::{compose, posterior, pushforward};
use lcgm_core::numeric::ratio;
use lcgm_core::{NumericMode, Rational, StochasticKernel};
use proptest::prelude::*;

const EXACT: NumericMode = NumericMode::Exact;

fn assert_stochastic(k: &StochasticKernel<Rational>) {
    k.validate(EXACT).unwrap();
    assert!(k.rows().iter().flatten().all(|x| *x >= ratio(0, 1)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pushforward_commutes_with_composition(seed: u64, a in 1usize..5, b in 1usize..5, c in 1usize..5) {
        let mut r = rng(seed);
        let (la, lb, lc) = (labels("a", a), labels("b", b), labels("c", c));
        let k = kernel(&mut r, &la, &lb);
        let l = kernel(&mut r, &lb, &lc);
        let q = distribution(&mut r, &la, false);
        let lk = compose(&l, &k).unwrap();
        assert_stochastic(&lk);
        prop_assert_eq!(pushforward(&lk, &q).unwrap(), pushforward(&l, &pushforward(&k, &q).unwrap()).unwrap());
    }

    #[test]
    fn composition_is_associative(seed: u64, a in 1usize..4, b in 1usize..4, c in 1usize..4, d in 1usize..4) {
        let mut r = rng(seed);
        let (la, lb, lc, ld) = (labels("a", a), labels("b", b), labels("c", c), labels("d", d));
        let k = kernel(&mut r, &la, &lb);
        let l = kernel(&mut r, &lb, &lc);
        let m = kernel(&mut r, &lc, &ld);
        prop_assert_eq!(
            compose(&m, &compose(&l, &k).unwrap()).unwrap(),
            compose(&compose(&m, &l).unwrap(), &k).unwrap()
        );
    }

    #[test]
    fn posterior_is_bayes_consistent(seed: u64, a in 1usize..5, b in 1usize..5) {
        let mut r = rng(seed);
        let (la, lb) = (labels("a", a), labels("b", b));
        let k = kernel(&mut r, &la, &lb);
        let q = distribution(&mut r, &la, true);
        let p = pushforward(&k, &q).unwrap();
        let h = posterior(&k, &q, EXACT).unwrap();
        assert_stochastic(&h);
        for c in 0..a {
            for z in 0..b {
                prop_assert_eq!(
                    h.entry(c, z).clone() * p.probs()[z].clone(),
                    k.entry(z, c).clone() * q.probs()[c].clone()
                );
            }
        }
        // the posterior pushes the feature distribution back onto Q
        prop_assert_eq!(pushforward(&h, &p).unwrap(), q);
    }

    #[test]
    fn posterior_inverts_bijective_dirac(seed: u64, n in 1usize..6) {
        let mut r = rng(seed);
        let (la, lb) = (labels("a", n), labels("b", n));
        let k = dirac(&la, &lb, &injection(&mut r, n, n));
        let q = distribution(&mut r, &la, false);
        let p = pushforward(&k, &q).unwrap();
        let h = posterior(&k, &q, EXACT).unwrap();
        prop_assert_eq!(pushforward(&h, &p).unwrap(), q);
    }

    #[test]
    fn posterior_zero_mass_features_are_uniform_on_support(seed: u64, a in 1usize..4, b in 1usize..5) {
        let mut r = rng(seed);
        let (la, lb) = (labels("a", a), labels("b", b));
        let k = kernel(&mut r, &la, &lb);
        let q = distribution(&mut r, &la, false);
        let p = pushforward(&k, &q).unwrap();
        let h = posterior(&k, &q, EXACT).unwrap();
        let support = q.support_indices(EXACT);
        for z in (0..b).filter(|&z| p.probs()[z] == ratio(0, 1)) {
            for c in 0..a {
                let want = if support.contains(&c) { ratio(1, support.len() as i64) } else { ratio(0, 1) };
                prop_assert_eq!(h.entry(c, z), &want);
            }
        }
    }
}
