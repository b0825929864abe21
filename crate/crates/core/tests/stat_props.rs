mod common;

use common::rng;
use lcgm_core::dictionary::{sample_exact_sparsity, Dictionary, SparseVector};
use lcgm_core::ica::{
    covariance, gaussian_rotation_invariance_check, random_orthogonal, rotation_search,
    sample_sources, whiten, SourceKind,
};
use lcgm_core::mixture::{
    best_permutation, em_fit, match_permutation, mixture_density, EmConfig, EmInit,
    GaussianComponent, GaussianMixture,
};
use lcgm_core::sae::{
    elbo_limit_objective, encode_map, map_objective, train_mod, Encoder, SaeModel, TrainConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn blobs(seed: u64) -> GaussianMixture {
    let mut r = rng(seed);
    let comps = (0..3)
        .map(|i| {
            let mean = DVector::from_fn(2, |j, _| if i == j + 1 { 8.0 } else { 0.0 } + r.random_range(-0.5..0.5));
            let a = DMatrix::from_fn(2, 2, |_, _| r.random_range(-0.6..0.6));
            GaussianComponent::new(mean, &a * a.transpose() + DMatrix::identity(2, 2) * 0.3).unwrap()
        })
        .collect();
    GaussianMixture::new(vec![0.3, 0.3, 0.4], comps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn rotation_search_returns_orthogonal_matrices(seed: u64, d in 1usize..5) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(400, d, |_, _| r.random_range(-1.0..1.0f64).powi(3));
        let rot = rotation_search(&x, 5);
        let err = (rot.transpose() * &rot - DMatrix::identity(d, d)).amax();
        prop_assert!(err <= 1e-10, "{}", err);
    }

    #[test]
    fn map_objective_decomposes(seed: u64, p in 1usize..6, d in 1usize..6, s in 1usize..4, sigma in 0.1f64..3.0, alpha in 0.0f64..2.0) {
        let mut r = rng(seed);
        let model = SaeModel::new(Dictionary::random_gaussian(p, d, &mut r), s, sigma, alpha).unwrap();
        let z = DVector::from_fn(p, |_, _| r.random_range(-2.0..2.0));
        let c = sample_exact_sparsity(d, s.min(d), 1, &mut r).remove(0);
        let lhs = map_objective(&model, &z, &c).unwrap();
        let rhs = elbo_limit_objective(&model, &z, &c).unwrap() + alpha * c.l1_norm();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn omp_encoding_beats_every_single_atom_code(seed: u64, p in 2usize..6, d in 1usize..7, s in 1usize..3, alpha in 0.0f64..1.0) {
        let mut r = rng(seed);
        let model = SaeModel::new(Dictionary::random_gaussian(p, d, &mut r), s, 1.0, alpha).unwrap();
        let z = DVector::from_fn(p, |_, _| r.random_range(-2.0..2.0));
        let code = encode_map(&model, &z, Encoder::Omp).unwrap();
        let best = map_objective(&model, &z, &code).unwrap();
        for j in 0..d {
            for k in -40..=40 {
                let single = SparseVector::new(d, vec![(j, k as f64 * 0.05)]).unwrap();
                prop_assert!(best <= map_objective(&model, &z, &single).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn em_log_likelihood_never_decreases(seed: u64, k in 1usize..4) {
        let mut r = rng(seed);
        let (x, _) = blobs(seed).sample(300, &mut r);
        let fit = em_fit(&x, k, &EmInit::KMeansPlusPlus(seed), &EmConfig::default()).unwrap();
        for w in fit.ll_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn permutation_matching_composes_and_inverts(seed: u64) {
        let mut r = rng(seed);
        let m = blobs(seed);
        let perm = common::injection(&mut r, 3, 3);
        let perm2 = common::injection(&mut r, 3, 3);
        let a = m.permuted(&perm);
        let b = a.permuted(&perm2);
        let same = match_permutation(&m, &m, 0.0).unwrap().unwrap();
        prop_assert_eq!(same.permutation, vec![0, 1, 2]);
        let ma = best_permutation(&m, &a).unwrap().permutation;
        let ab = best_permutation(&a, &b).unwrap().permutation;
        let mb = best_permutation(&m, &b).unwrap().permutation;
        let am = best_permutation(&a, &m).unwrap().permutation;
        for i in 0..3 {
            prop_assert_eq!(mb[i], ab[ma[i]]);
            prop_assert_eq!(am[ma[i]], i);
        }
    }
}

#[test]
fn whitening_reaches_identity_covariance() {
    let mut r = rng(5);
    let s = sample_sources(&[SourceKind::Uniform, SourceKind::Laplace, SourceKind::Uniform], 20_000, &mut r);
    let a = DMatrix::from_fn(4, 3, |_, _| r.random_range(-1.0..1.0));
    let w = whiten(&(s * a.transpose()), 3).unwrap();
    let err = (covariance(&w.data) - DMatrix::identity(3, 3)).amax();
    assert!(err < 0.02, "{err}");
}

#[test]
fn non_orthogonal_maps_are_detected() {
    for seed in 0..5 {
        let mut r = rng(seed);
        for d in 2..4 {
            let q = random_orthogonal(d, &mut r);
            let mut tau = q.clone();
            tau.column_mut(0).scale_mut(1.3);
            assert!((tau.transpose() * &tau - DMatrix::identity(d, d)).norm() >= 0.1);
            let bad = gaussian_rotation_invariance_check(d, seed, 20_000, Some(tau)).unwrap();
            assert!(!bad.passed, "seed {seed}, d {d}");
            let good = gaussian_rotation_invariance_check(d, seed, 20_000, Some(q)).unwrap();
            assert!(good.orthogonality_error < 1e-10);
        }
    }
}

#[test]
fn mixture_density_integrates_to_one() {
    let m = blobs(3);
    let mut r = rng(1);
    let (lo, hi) = (-6.0, 14.0);
    let n = 200_000;
    let area = (hi - lo) * (hi - lo);
    let total: f64 = (0..n)
        .map(|_| {
            let z = DVector::from_fn(2, |_, _| r.random_range(lo..hi));
            mixture_density(&m, &z)
        })
        .sum();
    let mass = total / n as f64 * area;
    assert!(mass >= 0.99 && mass <= 1.01, "{mass}");
}

#[test]
fn em_runs_from_different_seeds_agree_up_to_relabelling() {
    let m = blobs(7);
    let (x, _) = m.sample(1500, &mut rng(70));
    let fits: Vec<GaussianMixture> = (0..5)
        .map(|s| em_fit(&x, 3, &EmInit::KMeansPlusPlus(s), &EmConfig::default()).unwrap().model)
        .collect();
    let mut agree = 0;
    let mut pairs = 0;
    for a in 0..fits.len() {
        for b in a + 1..fits.len() {
            pairs += 1;
            agree += match_permutation(&fits[a], &fits[b], 0.3).unwrap().is_some() as usize;
        }
    }
    assert!(agree * 10 >= pairs * 8, "{agree}/{pairs}");
    assert!(match_permutation(&m, &fits[0], 0.3).unwrap().is_some());
}

#[test]
fn sae_training_loss_is_monotone() {
    let mut r = rng(9);
    let g = Dictionary::random_gaussian(6, 8, &mut r);
    let codes = sample_exact_sparsity(8, 2, 400, &mut r);
    let noise = 0.01;
    let x = DMatrix::from_fn(400, 6, |i, j| g.apply(&codes[i]).unwrap()[j] + noise * r.random_range(-1.0..1.0));
    let run = train_mod(&x, 8, 2, &TrainConfig { epochs: 60, ..TrainConfig::default() }).unwrap();
    for w in run.loss_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
    }
}
