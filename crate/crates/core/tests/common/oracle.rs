//! Collision oracle for sparse injectivity, independent of the spark code:
//! a random support `T` of size `2s` yields two distinct `s`-sparse codes
//! with the same image exactly when the columns on `T` are dependent.

use lcgm_core::dictionary::Dictionary;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

/// Number of probes that exhibit an explicit collision.
pub fn collisions(g: &Dictionary, s: usize, probes: usize, rng: &mut impl Rng) -> usize {
    let (p, d) = g.matrix().shape();
    let k = (2 * s).min(d);
    let mut found = 0;
    for _ in 0..probes {
        let support = sample(rng, d, k).into_vec();
        let sub = DMatrix::from_fn(p, k, |i, j| g.matrix()[(i, support[j])]);
        // square up so the SVD always exposes a full right basis
        let sub = if p < k { sub.insert_rows(p, k - p, 0.0) } else { sub };
        let svd = sub.clone().svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors");
        let (imin, smin) = svd.singular_values.argmin();
        let smax = svd.singular_values.max();
        if smin > 1e-9 * smax.max(1e-300) {
            continue;
        }
        let null = v_t.row(imin).transpose();
        let mut c1 = DVector::zeros(d);
        let mut c2 = DVector::zeros(d);
        for (j, &col) in support.iter().enumerate() {
            if j < s {
                c1[col] = null[j];
            } else {
                c2[col] = -null[j];
            }
        }
        let gap = (g.matrix() * &c1 - g.matrix() * &c2).norm();
        if (&c1 - &c2).norm() > 0.5 && gap <= 1e-8 {
            found += 1;
        }
    }
    found
}
