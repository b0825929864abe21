//! Small hand-checkable models used by the regression fixtures and tests.
//!
//! The mixing kernel `K` of the feature-equivalent pair is the column-stochastic
//! one, `K(·|a) = (2/3, 1/3)` and `K(·|b) = (0, 1)` over features `(u, v)`.

use rand::Rng;

use crate::blackwell::TransitionWitness;
use crate::kernel::{FiniteDistribution, Lcgm, StochasticKernel};
use crate::numeric::{ratio, Rational};
use crate::rng::prng;
use crate::transition::{ConceptClass, ConceptPredicate, KernelClass, KernelPredicate, Membership};

fn r(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

fn coarse_model() -> Lcgm<Rational> {
    let q = FiniteDistribution::from_strs(&["a", "b"], vec![r(3, 4), r(1, 4)]).unwrap();
    let k = StochasticKernel::from_strs(
        &["a", "b"],
        &["u", "v"],
        vec![vec![r(2, 3), r(0, 1)], vec![r(1, 3), r(1, 1)]],
    )
    .unwrap();
    Lcgm::new(q, k).unwrap()
}

fn uniform_cd() -> FiniteDistribution<Rational> {
    FiniteDistribution::from_strs(&["c", "d"], vec![r(1, 2), r(1, 2)]).unwrap()
}

/// Two models with the same feature distribution `(1/2, 1/2)` but different
/// concept extractors; the first is Blackwell coarser than the second.
pub fn feature_equivalent_pair() -> (Lcgm<Rational>, Lcgm<Rational>) {
    let k2 = StochasticKernel::from_strs(
        &["c", "d"],
        &["u", "v"],
        vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(1, 1)]],
    )
    .unwrap();
    (coarse_model(), Lcgm::new(uniform_cd(), k2).unwrap())
}

/// `T(·|a) = (2/3, 1/3)`, `T(·|b) = (0, 1)` over `(c, d)`.
pub fn coarsening_witness() -> TransitionWitness<Rational> {
    TransitionWitness {
        kernel: StochasticKernel::from_strs(
            &["a", "b"],
            &["c", "d"],
            vec![vec![r(2, 3), r(0, 1)], vec![r(1, 3), r(1, 1)]],
        )
        .unwrap(),
    }
}

/// Posterior of the coarse model: rows `(a, b)`, columns `(u, v)`.
pub fn coarse_posterior() -> StochasticKernel<Rational> {
    StochasticKernel::from_strs(
        &["u", "v"],
        &["a", "b"],
        vec![vec![r(1, 1), r(1, 2)], vec![r(0, 1), r(1, 2)]],
    )
    .unwrap()
}

/// Feature-equivalent models where neither is a coarsening of the other.
pub fn incomparable_pair() -> (Lcgm<Rational>, Lcgm<Rational>) {
    let k2 = StochasticKernel::from_strs(
        &["c", "d"],
        &["u", "v"],
        vec![vec![r(3, 4), r(1, 4)], vec![r(1, 4), r(3, 4)]],
    )
    .unwrap();
    (coarse_model(), Lcgm::new(uniform_cd(), k2).unwrap())
}

/// The unique sign-unconstrained solutions of the coarsening equations of
/// [`incomparable_pair`], forward (rows `c, d`) and backward (rows `a, b`).
pub fn incomparable_unconstrained_solutions() -> (Vec<Vec<Rational>>, Vec<Vec<Rational>>) {
    (
        vec![vec![r(5, 6), r(-1, 2)], vec![r(1, 6), r(3, 2)]],
        vec![vec![r(9, 8), r(3, 8)], vec![r(-1, 8), r(5, 8)]],
    )
}

/// A sampled finite mixture class on `d` concepts.
#[derive(Debug, Clone)]
pub struct MixtureClass {
    pub labels: Vec<String>,
    pub base: FiniteDistribution<Rational>,
    pub concepts: ConceptClass<Rational>,
    pub kernels: KernelClass<Rational>,
}

fn normalized(weights: &[i64]) -> Vec<Rational> {
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| r(w, total)).collect()
}

/// Full-support concept distributions and kernels with pairwise distinct
/// columns over `d + 1` features, all with small integer-ratio entries.
/// Kernel membership is by predicate, so the class is closed under
/// relabelling the concepts.
pub fn mixture_class(d: usize, samples: usize, seed: u64) -> MixtureClass {
    assert!(d >= 1 && samples >= 1);
    let mut rng = prng(seed);
    let labels: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    let features: Vec<String> = (0..=d).map(|i| format!("x{i}")).collect();
    let concept_samples = (0..samples)
        .map(|_| {
            let w: Vec<i64> = (0..d).map(|_| rng.random_range(1..10)).collect();
            FiniteDistribution::new(labels.clone(), normalized(&w)).unwrap()
        })
        .collect();
    let kernel_samples = (0..samples)
        .map(|_| {
            let mut cols: Vec<Vec<Rational>> = Vec::with_capacity(d);
            while cols.len() < d {
                let mut w: Vec<i64> = (0..=d).map(|_| rng.random_range(0..10)).collect();
                if w.iter().all(|&x| x == 0) {
                    w[0] = 1;
                }
                let col = normalized(&w);
                if !cols.contains(&col) {
                    cols.push(col);
                }
            }
            let rows = (0..=d).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
            StochasticKernel::new(labels.clone(), features.clone(), rows).unwrap()
        })
        .collect();
    MixtureClass {
        base: FiniteDistribution::uniform(labels.clone()).unwrap(),
        concepts: ConceptClass {
            samples: concept_samples,
            predicates: vec![ConceptPredicate::FullSupport],
        },
        kernels: KernelClass::of_samples(kernel_samples)
            .with_predicates(vec![KernelPredicate::DistinctColumns])
            .with_membership(Membership::Predicates),
        labels,
    }
}
