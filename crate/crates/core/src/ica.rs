//! Linear ICA at desk scale: whitening, a Jacobi rotation search on squared
//! excess kurtosis, signed-permutation alignment, and the Gaussian-rotation
//! and independence demonstrations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{LcgmError, Result};
use crate::rng::{prng, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Uniform,
    Laplace,
    Gaussian,
}

impl std::str::FromStr for SourceKind {
    type Err = LcgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(SourceKind::Uniform),
            "laplace" => Ok(SourceKind::Laplace),
            "gaussian" | "normal" => Ok(SourceKind::Gaussian),
            other => Err(LcgmError::Parse(format!("unknown source kind `{other}`"))),
        }
    }
}

impl SourceKind {
    /// One zero-mean, unit-variance draw.
    pub fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            SourceKind::Uniform => (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt(),
            SourceKind::Laplace => {
                let u = rng.random::<f64>() - 0.5;
                let b = std::f64::consts::FRAC_1_SQRT_2;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
            SourceKind::Gaussian => rng.sample(StandardNormal),
        }
    }
}

/// `n × d` matrix of independent sources.
pub fn sample_sources(kinds: &[SourceKind], n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, kinds.len());
    for i in 0..n {
        for (j, k) in kinds.iter().enumerate() {
            s[(i, j)] = k.sample(rng);
        }
    }
    s
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_means(x);
    let mut c = x.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    c
}

pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let c = centered(x);
    c.tr_mul(&c) / x.nrows() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    /// `d × p`.
    pub whitener: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// `n × d` whitened data.
    pub data: DMatrix<f64>,
}

/// Projects centered data onto the top `d` principal directions scaled to
/// unit variance.
pub fn whiten(x: &DMatrix<f64>, d: usize) -> Result<Whitening> {
    let (n, p) = x.shape();
    if d == 0 || d > p || n < 2 {
        return Err(LcgmError::InvalidArgument(format!(
            "cannot whiten {n}×{p} data to dimension {d}"
        )));
    }
    let cov = covariance(x);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let mut whitener = DMatrix::zeros(d, p);
    for (r, &k) in order.iter().take(d).enumerate() {
        let lambda = eig.eigenvalues[k];
        if !(lambda > 1e-10 * top.max(f64::MIN_POSITIVE)) {
            return Err(LcgmError::RankDeficient(format!(
                "covariance has rank < {d} (eigenvalue {lambda:.3e})"
            )));
        }
        let row = eig.eigenvectors.column(k).transpose() / lambda.sqrt();
        whitener.set_row(r, &row);
    }
    let data = centered(x) * whitener.transpose();
    Ok(Whitening {
        whitener,
        mean: column_means(x),
        data,
    })
}

fn excess_kurtosis(m4: [f64; 5], c: f64, s: f64) -> f64 {
    let [m40, m31, m22, m13, m04] = m4;
    c.powi(4) * m40
        + 4.0 * c.powi(3) * s * m31
        + 6.0 * c * c * s * s * m22
        + 4.0 * c * s.powi(3) * m13
        + s.powi(4) * m04
        - 3.0
}

fn pair_contrast(m4: [f64; 5], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    excess_kurtosis(m4, c, s).powi(2) + excess_kurtosis(m4, -s, c).powi(2)
}

fn pair_moments(y: &DMatrix<f64>, i: usize, j: usize) -> [f64; 5] {
    let n = y.nrows() as f64;
    let mut m = [0.0; 5];
    for (a, b) in y.column(i).iter().zip(y.column(j).iter()) {
        let (a2, b2) = (a * a, b * b);
        m[0] += a2 * a2;
        m[1] += a2 * a * b;
        m[2] += a2 * b2;
        m[3] += a * b2 * b;
        m[4] += b2 * b2;
    }
    m.map(|v| v / n)
}

fn best_angle(m4: [f64; 5]) -> f64 {
    // contrast has period π/2
    const GRID: usize = 64;
    let period = std::f64::consts::FRAC_PI_2;
    let step = period / GRID as f64;
    let mut best = (0.0, pair_contrast(m4, 0.0));
    for k in 1..GRID {
        let t = k as f64 * step;
        let v = pair_contrast(m4, t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (pair_contrast(m4, x1), pair_contrast(m4, x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = pair_contrast(m4, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = pair_contrast(m4, x1);
        }
    }
    let t = 0.5 * (lo + hi);
    if pair_contrast(m4, t) >= best.1 {
        t
    } else {
        best.0
    }
}

/// Orthogonal `R` maximizing the summed squared excess kurtosis of the rows
/// of `R x`, by Jacobi sweeps of pairwise Givens rotations.
pub fn rotation_search(xw: &DMatrix<f64>, sweeps: usize) -> DMatrix<f64> {
    let d = xw.ncols();
    let mut r = DMatrix::<f64>::identity(d, d);
    let mut y = xw.clone();
    for _ in 0..sweeps {
        let mut moved = false;
        for i in 0..d {
            for j in i + 1..d {
                let m4 = pair_moments(&y, i, j);
                let theta = best_angle(m4);
                if pair_contrast(m4, theta) <= pair_contrast(m4, 0.0) + 1e-14 || theta.abs() < 1e-12 {
                    continue;
                }
                moved = true;
                let (s, c) = theta.sin_cos();
                let (yi, yj) = (y.column(i).into_owned(), y.column(j).into_owned());
                y.set_column(i, &(&yi * c + &yj * s));
                y.set_column(j, &(&yj * c - &yi * s));
                let (ri, rj) = (r.row(i).into_owned(), r.row(j).into_owned());
                r.set_row(i, &(&ri * c + &rj * s));
                r.set_row(j, &(&rj * c - &ri * s));
            }
        }
        if !moved {
            break;
        }
    }
    r
}

/// `a_i ≈ signs[i] · b_{permutation[i]}` after column normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedPermutation {
    pub permutation: Vec<usize>,
    pub signs: Vec<i8>,
    pub max_error: f64,
}

fn normalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    out
}

/// Best signed permutation by bottleneck assignment on
/// `min(‖a_i − b_j‖, ‖a_i + b_j‖)` of normalized columns.
pub fn best_signed_permutation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SignedPermutation> {
    if a.shape() != b.shape() {
        return Err(LcgmError::DomainMismatch(format!(
            "shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (na, nb) = (normalize_columns(a), normalize_columns(b));
    let d = a.ncols();
    let dist = |i: usize, j: usize| {
        let minus = (na.column(i) - nb.column(j)).norm();
        let plus = (na.column(i) + nb.column(j)).norm();
        (minus.min(plus), if plus < minus { -1 } else { 1 })
    };
    let cost: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| dist(i, j).0).collect()).collect();
    let permutation = assignment::bottleneck(&cost);
    let signs = permutation.iter().enumerate().map(|(i, &j)| dist(i, j).1).collect();
    let max_error = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .fold(0.0, f64::max);
    Ok(SignedPermutation {
        permutation,
        signs,
        max_error,
    })
}

pub fn match_signed_permutation(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<Option<SignedPermutation>> {
    let w = best_signed_permutation(a, b)?;
    Ok((w.max_error <= tol).then_some(w))
}

pub fn is_signed_permutation(t: &DMatrix<f64>, tol: f64) -> bool {
    let d = t.nrows();
    t.ncols() == d
        && (0..d).all(|j| {
            let col = t.column(j);
            col.iter().filter(|x| (x.abs() - 1.0).abs() <= tol).count() == 1
                && col.iter().filter(|x| x.abs() > tol).count() == 1
        })
        && (0..d).all(|i| t.row(i).iter().filter(|x| x.abs() > tol).count() == 1)
}

/// Haar-distributed orthogonal matrix via sign-corrected QR.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `‖AᵀA − I‖_∞`.
pub fn orthogonality_error(a: &DMatrix<f64>) -> f64 {
    let d = a.ncols();
    (a.tr_mul(a) - DMatrix::identity(d, d)).amax()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaResult {
    /// `d × p`.
    pub unmixing: DMatrix<f64>,
    /// `p × d`.
    pub mixing_estimate: DMatrix<f64>,
    pub rotation_orthogonality_error: f64,
}

/// Whitening followed by rotation search; `mixing_estimate` is the
/// pseudo-inverse of the unmixing matrix.
pub fn fit_ica(x: &DMatrix<f64>, d: usize, sweeps: usize) -> Result<IcaResult> {
    let w = whiten(x, d)?;
    let r = rotation_search(&w.data, sweeps);
    let unmixing = &r * &w.whitener;
    let mixing_estimate = unmixing
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| LcgmError::InvariantViolation(e.to_string()))?;
    Ok(IcaResult {
        rotation_orthogonality_error: orthogonality_error(&r),
        unmixing,
        mixing_estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaConfig {
    pub sources: Vec<SourceKind>,
    /// Observed dimension; defaults to the number of sources.
    pub p: Option<usize>,
    pub n: usize,
    pub seed: u64,
    pub sweeps: usize,
    pub tol: f64,
    pub max_condition: f64,
}

impl IcaConfig {
    pub fn new(sources: Vec<SourceKind>, n: usize, seed: u64) -> Self {
        IcaConfig {
            sources,
            p: None,
            n,
            seed,
            sweeps: 10,
            tol: 0.15,
            max_condition: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaReport {
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub sources: Vec<SourceKind>,
    pub condition_number: f64,
    pub true_mixing: DMatrix<f64>,
    pub result: IcaResult,
    pub best_alignment: SignedPermutation,
    pub aligned: bool,
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    sv.max() / sv.min()
}

/// Random well-conditioned mixing of independent sources, then recovery and
/// alignment against the truth.
pub fn ica_experiment(cfg: &IcaConfig) -> Result<IcaReport> {
    let d = cfg.sources.len();
    let p = cfg.p.unwrap_or(d);
    if d == 0 || p < d {
        return Err(LcgmError::InvalidArgument(format!(
            "need 1 ≤ d ≤ p, got d = {d}, p = {p}"
        )));
    }
    let mut rng = substream(cfg.seed, 0);
    let mixing = loop {
        let a = DMatrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        if condition_number(&a) <= cfg.max_condition {
            break a;
        }
    };
    let s = sample_sources(&cfg.sources, cfg.n, &mut substream(cfg.seed, 1));
    let x = &s * mixing.transpose();
    let result = fit_ica(&x, d, cfg.sweeps)?;
    let best = best_signed_permutation(&mixing, &result.mixing_estimate)?;
    Ok(IcaReport {
        d,
        p,
        n: cfg.n,
        seed: cfg.seed,
        sources: cfg.sources.clone(),
        condition_number: condition_number(&mixing),
        aligned: best.max_error <= cfg.tol,
        best_alignment: best,
        true_mixing: mixing,
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub d: usize,
    pub n: usize,
    pub tau: DMatrix<f64>,
    pub orthogonality_error: f64,
    /// Largest `|mean_i|` in units of its standard error.
    pub max_mean_z: f64,
    /// Largest `|cov_ij − δ_ij|` in units of its standard error.
    pub max_cov_z: f64,
    pub cov_frobenius_error: f64,
    pub moments_within_bands: bool,
    pub passed: bool,
}

/// Samples `N(0, I_d)`, pushes it through `τ` (random orthogonal unless
/// given) and compares the first two empirical moments with `N(0, I_d)`
/// using 3-standard-error bands.
pub fn gaussian_rotation_invariance_check(
    d: usize,
    seed: u64,
    n: usize,
    tau: Option<DMatrix<f64>>,
) -> Result<InvarianceReport> {
    if d == 0 || n < 2 {
        return Err(LcgmError::InvalidArgument("need d ≥ 1 and n ≥ 2".into()));
    }
    let tau = match tau {
        Some(t) if t.shape() == (d, d) => t,
        Some(t) => {
            return Err(LcgmError::DomainMismatch(format!(
                "τ has shape {:?}, expected {d}×{d}",
                t.shape()
            )))
        }
        None => random_orthogonal(d, &mut substream(seed, 0)),
    };
    let z = sample_sources(&vec![SourceKind::Gaussian; d], n, &mut substream(seed, 1));
    let y = &z * tau.transpose();
    let nf = n as f64;
    let mean = column_means(&y);
    let max_mean_z = mean.amax() * nf.sqrt();
    // second moments about zero: the population mean is known
    let second = y.tr_mul(&y) / nf;
    let mut max_cov_z: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            let se = ((1.0 + target) / nf).sqrt();
            max_cov_z = max_cov_z.max((second[(i, j)] - target).abs() / se);
        }
    }
    let cov_frobenius_error = (covariance(&y) - DMatrix::identity(d, d)).norm();
    let orth = orthogonality_error(&tau);
    let within = max_mean_z <= 3.0 && max_cov_z <= 3.0;
    Ok(InvarianceReport {
        d,
        n,
        orthogonality_error: orth,
        max_mean_z,
        max_cov_z,
        cov_frobenius_error,
        moments_within_bands: within,
        passed: within && orth <= 1e-10,
        tau,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarmoisConfig {
    pub subsample: usize,
    pub permutations: usize,
    pub alpha: f64,
}

impl Default for DarmoisConfig {
    fn default() -> Self {
        DarmoisConfig {
            subsample: 2000,
            permutations: 200,
            alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDependence {
    pub i: usize,
    pub j: usize,
    pub distance_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarmoisReport {
    pub d: usize,
    pub n: usize,
    pub subsample: usize,
    pub t_is_signed_permutation: bool,
    pub pairs: Vec<PairDependence>,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub independence_rejected: bool,
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64 / x.len() as f64;
    }
    r
}

fn double_centered(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut a = DMatrix::from_fn(m, m, |k, l| (x[k] - x[l]).abs());
    let row: Vec<f64> = (0..m).map(|k| a.row(k).mean()).collect();
    let all = row.iter().sum::<f64>() / m as f64;
    for k in 0..m {
        for l in 0..m {
            a[(k, l)] += all - row[k] - row[l];
        }
    }
    a
}

fn dcov2(a: &DMatrix<f64>, b: &DMatrix<f64>, perm: Option<&[usize]>) -> f64 {
    let m = a.nrows();
    let mut s = 0.0;
    match perm {
        None => s = a.component_mul(b).sum(),
        Some(p) => {
            for l in 0..m {
                let (ca, cb) = (a.column(l), b.column(p[l]));
                let (ca, cb) = (ca.as_slice(), cb.as_slice());
                s += p.iter().zip(ca).map(|(&pk, x)| x * cb[pk]).sum::<f64>();
            }
        }
    }
    s / (m * m) as f64
}

/// Mutual-independence permutation test on `T · sources` using rank-based
/// distance covariance summed over coordinate pairs. Each coordinate is
/// permuted independently under the null.
pub fn darmois_consequence_test(
    t: &DMatrix<f64>,
    sources: &[SourceKind],
    n: usize,
    seed: u64,
    config: &DarmoisConfig,
) -> Result<DarmoisReport> {
    let d = sources.len();
    if t.shape() != (d, d) {
        return Err(LcgmError::DomainMismatch(format!(
            "T has shape {:?} for {d} sources",
            t.shape()
        )));
    }
    if d < 2 {
        return Err(LcgmError::InvalidArgument("need at least two sources".into()));
    }
    if orthogonality_error(t) > 1e-8 {
        return Err(LcgmError::PreconditionFailed(vec!["T must be orthogonal".into()]));
    }
    let s = sample_sources(sources, n, &mut substream(seed, 0));
    let y = s * t.transpose();
    let m = n.min(config.subsample);
    if m < 4 {
        return Err(LcgmError::InvalidArgument("too few samples".into()));
    }
    let centered: Vec<DMatrix<f64>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = y.column(j).iter().take(m).copied().collect();
            double_centered(&ranks(&col))
        })
        .collect();
    let dvar: Vec<f64> = centered.iter().map(|a| dcov2(a, a, None)).collect();

    let mut pairs = Vec::new();
    let mut statistic = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let v = dcov2(&centered[i], &centered[j], None);
            statistic += v;
            pairs.push(PairDependence {
                i,
                j,
                distance_correlation: (v.max(0.0) / (dvar[i] * dvar[j]).sqrt()).sqrt(),
            });
        }
    }

    let mut rng = prng(seed ^ 0xD1B5_4A32_D192_ED03);
    let mut exceed = 0usize;
    for _ in 0..config.permutations {
        let perms: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..m).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        // permuting every coordinate is equivalent to fixing the first
        let mut null = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let rel: Vec<usize> = if i == 0 {
                    perms[j].clone()
                } else {
                    let mut inv = vec![0; m];
                    for (k, &v) in perms[i].iter().enumerate() {
                        inv[v] = k;
                    }
                    (0..m).map(|k| perms[j][inv[k]]).collect()
                };
                null += dcov2(&centered[i], &centered[j], Some(&rel));
            }
        }
        if null >= statistic {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + config.permutations) as f64;
    Ok(DarmoisReport {
        d,
        n,
        subsample: m,
        t_is_signed_permutation: is_signed_permutation(t, 1e-9),
        pairs,
        statistic,
        p_value,
        alpha: config.alpha,
        independence_rejected: p_value < config.alpha,
    })
}

pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
