//! Finite Gaussian mixtures: density, EM fitting, the distinct-component
//! predicate and matching up to relabeling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::assignment;
use crate::error::{LcgmError, Result};
use crate::rng::prng;

/// Eigenvalue floor applied to fitted covariances.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if p == 0 || covariance.shape() != (p, p) {
            return Err(LcgmError::DomainMismatch(format!(
                "mean of length {p} with covariance {:?}",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(LcgmError::InvalidArgument("non-finite parameter".into()));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(LcgmError::InvalidArgument("covariance is not symmetric".into()));
        }
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            LcgmError::InvalidArgument("covariance is not positive definite".into())
        })?;
        Ok(GaussianComponent {
            mean,
            covariance,
            chol,
        })
    }

    pub fn standard(p: usize) -> Self {
        Self::new(DVector::zeros(p), DMatrix::identity(p, p)).expect("identity is PD")
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, z: &DVector<f64>) -> f64 {
        let p = self.dim() as f64;
        let diff = z - &self.mean;
        let y = self.chol.l_dirty().solve_lower_triangular(&diff).expect("PD factor");
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>() * 2.0;
        -0.5 * (p * (2.0 * std::f64::consts::PI).ln() + log_det + y.norm_squared())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        let e = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.chol.l() * e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(LcgmError::DomainMismatch(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(LcgmError::InvalidDistribution(
                "mixture weights must be nonnegative and sum to 1".into(),
            ));
        }
        let p = components[0].dim();
        if components.iter().any(|c| c.dim() != p) {
            return Err(LcgmError::DomainMismatch("components of different dimension".into()));
        }
        Ok(GaussianMixture {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn log_density(&self, z: &DVector<f64>) -> f64 {
        log_sum_exp(
            self.weights
                .iter()
                .zip(&self.components)
                .map(|(w, c)| w.ln() + c.log_density(z)),
        )
    }

    /// `n × p` sample matrix and the component label of each row.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> (DMatrix<f64>, Vec<usize>) {
        let mut x = DMatrix::zeros(n, self.dim());
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut u = rng.random::<f64>();
            let mut c = self.k() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                if u < *w {
                    c = j;
                    break;
                }
                u -= w;
            }
            x.set_row(i, &self.components[c].sample(rng).transpose());
            labels.push(c);
        }
        (x, labels)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        GaussianMixture {
            weights: perm.iter().map(|&j| self.weights[j]).collect(),
            components: perm.iter().map(|&j| self.components[j].clone()).collect(),
        }
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `Σ_c w_c N(z; μ_c, Σ_c)`.
pub fn mixture_density(m: &GaussianMixture, z: &DVector<f64>) -> f64 {
    m.log_density(z).exp()
}

fn parameter_gap(a: &GaussianComponent, b: &GaussianComponent) -> f64 {
    (a.mean() - b.mean())
        .amax()
        .max((a.covariance() - b.covariance()).amax())
}

/// Every pair of components differs by more than `tol` in the max-norm of
/// stacked mean and covariance parameters.
pub fn check_distinct_gaussian(m: &GaussianMixture, tol: f64) -> bool {
    let cs = m.components();
    (0..cs.len()).all(|i| (i + 1..cs.len()).all(|j| parameter_gap(&cs[i], &cs[j]) > tol))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    KMeansPlusPlus(u64),
    Explicit(GaussianMixture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    pub ll_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 500,
            ll_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: GaussianMixture,
    /// Mean log-likelihood per sample, one entry per iteration.
    pub ll_trace: Vec<f64>,
    pub converged: bool,
    /// Some covariance hit the eigenvalue floor or a component was reseeded.
    pub degenerate: bool,
    pub reinitialized: usize,
}

fn floor_covariance(cov: DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let floored = eig.eigenvalues.iter().any(|&l| l < COVARIANCE_FLOOR);
    if !floored {
        return (sym, false);
    }
    let vals = eig.eigenvalues.map(|l| l.max(COVARIANCE_FLOOR));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    ((&out + out.transpose()) * 0.5, floored)
}

fn kmeans_pp(rows: &[DVector<f64>], k: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = prng(seed);
    let mut centers = vec![rows[rng.random_range(0..rows.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|x| {
                centers
                    .iter()
                    .map(|c| (x - c).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = rows.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..rows.len())
        };
        centers.push(rows[next].clone());
    }
    centers
}

fn sample_covariance(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mean = rows.iter().fold(DVector::zeros(p), |a, x| a + x) / n;
    rows.iter()
        .fold(DMatrix::zeros(p, p), |a, x| a + (x - &mean) * (x - &mean).transpose())
        / n
}

/// Expectation maximization on the rows of `data` (`n × p`).
pub fn em_fit(data: &DMatrix<f64>, k: usize, init: &EmInit, config: &EmConfig) -> Result<EmFit> {
    let (n, p) = data.shape();
    if k == 0 || n < k {
        return Err(LcgmError::InvalidArgument(format!(
            "need 1 ≤ k ≤ n, got k = {k}, n = {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(LcgmError::InvalidArgument("data has non-finite entries".into()));
    }
    let rows: Vec<DVector<f64>> = data.row_iter().map(|r| r.transpose()).collect();
    let mut degenerate = false;
    let mut model = match init {
        EmInit::Explicit(m) => {
            if m.k() != k || m.dim() != p {
                return Err(LcgmError::DomainMismatch(
                    "initial model does not match k or p".into(),
                ));
            }
            m.clone()
        }
        EmInit::KMeansPlusPlus(seed) => {
            let (pooled, floored) = floor_covariance(sample_covariance(&rows));
            degenerate |= floored;
            let comps = kmeans_pp(&rows, k, *seed)
                .into_iter()
                .map(|c| GaussianComponent::new(c, pooled.clone()))
                .collect::<Result<Vec<_>>>()?;
            GaussianMixture::new(vec![1.0 / k as f64; k], comps)?
        }
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut reinitialized = 0;
    for _ in 0..config.max_iters {
        // E-step
        let (resp, ll): (Vec<Vec<f64>>, Vec<f64>) = rows
            .par_iter()
            .map(|x| {
                let logs: Vec<f64> = model
                    .weights
                    .iter()
                    .zip(&model.components)
                    .map(|(w, c)| w.ln() + c.log_density(x))
                    .collect();
                let total = log_sum_exp(logs.iter().copied());
                (logs.iter().map(|l| (l - total).exp()).collect(), total)
            })
            .unzip();
        let mean_ll = ll.iter().sum::<f64>() / n as f64;
        let stop = trace
            .last()
            .is_some_and(|&prev: &f64| (mean_ll - prev).abs() <= config.ll_tol * prev.abs().max(1.0));
        trace.push(mean_ll);
        if stop {
            converged = true;
            break;
        }

        // M-step
        let mut weights = Vec::with_capacity(k);
        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 {
                reinitialized += 1;
                degenerate = true;
                let far = farthest_point(&rows, &model);
                log::warn!("component {c} lost all mass; reseeding at row {far}");
                let (cov, _) = floor_covariance(sample_covariance(&rows));
                comps.push(GaussianComponent::new(rows[far].clone(), cov)?);
                weights.push(1.0 / n as f64);
                continue;
            }
            let mean = rows
                .iter()
                .zip(&resp)
                .fold(DVector::zeros(p), |a, (x, r)| a + x * r[c])
                / nk;
            let cov = rows.iter().zip(&resp).fold(DMatrix::zeros(p, p), |a, (x, r)| {
                let diff = x - &mean;
                a + &diff * diff.transpose() * r[c]
            }) / nk;
            let (cov, floored) = floor_covariance(cov);
            degenerate |= floored;
            comps.push(GaussianComponent::new(mean, cov)?);
            weights.push(nk / n as f64);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        model = GaussianMixture::new(weights, comps)?;
    }
    Ok(EmFit {
        model,
        ll_trace: trace,
        converged,
        degenerate,
        reinitialized,
    })
}

fn farthest_point(rows: &[DVector<f64>], model: &GaussianMixture) -> usize {
    rows.iter()
        .enumerate()
        .map(|(i, x)| (i, model.log_density(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i)
}

/// `‖Δμ‖ + ‖ΔΣ‖_F + |Δw|` between component `i` of `a` and `j` of `b`.
pub fn component_distance(a: &GaussianMixture, i: usize, b: &GaussianMixture, j: usize) -> f64 {
    let (ca, cb) = (&a.components[i], &b.components[j]);
    (ca.mean() - cb.mean()).norm()
        + (ca.covariance() - cb.covariance()).norm()
        + (a.weights[i] - b.weights[j]).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatch {
    /// Component `i` of the first model corresponds to `permutation[i]` of
    /// the second.
    pub permutation: Vec<usize>,
    pub max_distance: f64,
}

/// Assignment minimizing the largest matched component distance.
pub fn best_permutation(a: &GaussianMixture, b: &GaussianMixture) -> Result<ComponentMatch> {
    if a.k() != b.k() || a.dim() != b.dim() {
        return Err(LcgmError::DomainMismatch(format!(
            "mixtures with (k, p) = ({}, {}) and ({}, {})",
            a.k(),
            a.dim(),
            b.k(),
            b.dim()
        )));
    }
    let k = a.k();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| component_distance(a, i, b, j)).collect())
        .collect();
    let permutation = assignment::bottleneck(&cost);
    let max_distance = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .fold(0.0, f64::max);
    Ok(ComponentMatch {
        permutation,
        max_distance,
    })
}

pub fn match_permutation(
    a: &GaussianMixture,
    b: &GaussianMixture,
    tol: f64,
) -> Result<Option<ComponentMatch>> {
    let m = best_permutation(a, b)?;
    Ok((m.max_distance <= tol).then_some(m))
}
