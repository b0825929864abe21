#![allow(dead_code)]

pub mod oracle;

use lcgm_core::numeric::ratio;
use lcgm_core::rng::{prng, Prng};
use lcgm_core::{FiniteDistribution, Lcgm, Rational, StochasticKernel};
use rand::Rng;

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Integer weights in `[lo, 9]`, normalized; at least one entry positive.
pub fn weights(rng: &mut Prng, n: usize, lo: i64) -> Vec<Rational> {
    let mut w: Vec<i64> = (0..n).map(|_| rng.random_range(lo..10)).collect();
    if w.iter().all(|&x| x == 0) {
        w[rng.random_range(0..n)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.iter().map(|&x| ratio(x, total)).collect()
}

pub fn distribution(rng: &mut Prng, labels: &[String], full_support: bool) -> FiniteDistribution<Rational> {
    let lo = if full_support { 1 } else { 0 };
    FiniteDistribution::new(labels.to_vec(), weights(rng, labels.len(), lo)).unwrap()
}

pub fn kernel(rng: &mut Prng, source: &[String], target: &[String]) -> StochasticKernel<Rational> {
    let cols: Vec<Vec<Rational>> = (0..source.len()).map(|_| weights(rng, target.len(), 0)).collect();
    let rows = (0..target.len())
        .map(|i| cols.iter().map(|c| c[i].clone()).collect())
        .collect();
    StochasticKernel::new(source.to_vec(), target.to_vec(), rows).unwrap()
}

pub fn model(rng: &mut Prng, concepts: &[String], features: &[String], full_support: bool) -> Lcgm<Rational> {
    Lcgm::new(distribution(rng, concepts, full_support), kernel(rng, concepts, features)).unwrap()
}

pub fn rng(seed: u64) -> Prng {
    prng(seed)
}

/// Random injection of `[n]` into `[m]`.
pub fn injection(rng: &mut Prng, n: usize, m: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..n {
        let j = rng.random_range(i..m);
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool
}

pub fn dirac(source: &[String], target: &[String], map: &[usize]) -> StochasticKernel<Rational> {
    StochasticKernel::dirac(source.to_vec(), target.to_vec(), |j| map[j]).unwrap()
}
