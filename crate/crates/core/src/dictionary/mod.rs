//! Linear dictionaries `G ∈ ℝ^{p×d}` acting on sparse codes: spark and
//! incoherence, injectivity on `s`-sparse vectors, OMP, and equivalence up to
//! scale and permutation.

pub mod learn;

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment;
use crate::error::{LcgmError, Result};
use crate::numeric::{rank, NumericMode, Rational};
use crate::rng::prng;

/// Default relative singular-value threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Largest `d` for which brute-force spark is attempted by default.
pub const SPARK_MAX_D: usize = 14;
/// Largest subset size enumerated by default.
pub const SPARK_MAX_K: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: DMatrix<f64>,
}

impl Dictionary {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(LcgmError::InvalidArgument(
                "dictionary has non-finite entries".into(),
            ));
        }
        if let Some(j) = (0..matrix.ncols()).find(|&j| matrix.column(j).iter().all(|&x| x == 0.0))
        {
            return Err(LcgmError::DegenerateColumn(j));
        }
        Ok(Dictionary { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if p == 0 || d == 0 {
            return Err(LcgmError::InvalidArgument("empty dictionary".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(LcgmError::InvalidArgument("ragged dictionary rows".into()));
        }
        Self::new(DMatrix::from_fn(p, d, |i, j| rows[i][j]))
    }

    /// `p × d` matrix with i.i.d. Gaussian entries and unit-norm columns.
    pub fn random_gaussian(p: usize, d: usize, rng: &mut impl Rng) -> Self {
        let m = DMatrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        Dictionary { matrix: m }.normalized()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.matrix.column(j).into_owned()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.d()).map(|j| self.matrix.column(j).norm()).collect()
    }

    pub fn normalized(&self) -> Self {
        let mut m = self.matrix.clone();
        for mut col in m.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= n;
            }
        }
        Dictionary { matrix: m }
    }

    pub fn apply(&self, c: &SparseVector) -> Result<DVector<f64>> {
        if c.dim() != self.d() {
            return Err(LcgmError::DomainMismatch(format!(
                "code of dimension {} for dictionary with {} atoms",
                c.dim(),
                self.d()
            )));
        }
        let mut z = DVector::zeros(self.p());
        for &(j, v) in c.entries() {
            z.axpy(v, &self.matrix.column(j), 1.0);
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Entries are sorted by index; duplicates and out-of-range indices are
    /// rejected.
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(LcgmError::InvalidArgument("duplicate index in sparse vector".into()));
        }
        if entries.last().is_some_and(|e| e.0 >= dim) {
            return Err(LcgmError::InvalidArgument("sparse index out of range".into()));
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(v: &[f64]) -> Self {
        SparseVector {
            dim: v.len(),
            entries: v
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, x))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.1 != 0.0)
            .map(|e| e.0)
            .collect()
    }

    /// `‖c‖₀`.
    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|e| e.1 != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn scale_entries(&mut self, scales: &[f64]) {
        for e in &mut self.entries {
            e.1 *= scales[e.0];
        }
    }
}

fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&x| x > rank_tol * top).count()
}

/// Smallest `k ≤ max_k` such that some `k` columns are linearly dependent,
/// or `None` if every subset up to `max_k` is independent. `rank_tol` is
/// relative to the largest singular value of each submatrix.
pub fn spark_bruteforce(g: &Dictionary, max_k: usize, rank_tol: f64) -> Option<usize> {
    let d = g.d();
    for k in 1..=max_k.min(d) {
        if k > g.p() {
            return Some(k);
        }
        let subsets: Vec<Vec<usize>> = (0..d).combinations(k).collect();
        let dependent = subsets
            .par_iter()
            .any(|cols| numerical_rank(&g.matrix.select_columns(cols), rank_tol) < k);
        if dependent {
            return Some(k);
        }
    }
    None
}

/// Exact-arithmetic spark for rational dictionaries given as rows.
pub fn spark_bruteforce_exact(rows: &[Vec<Rational>], max_k: usize) -> Option<usize> {
    let d = rows.first().map_or(0, Vec::len);
    for k in 1..=max_k.min(d) {
        let subsets: Vec<Vec<usize>> = (0..d).combinations(k).collect();
        let dependent = subsets.par_iter().any(|cols| {
            let sub: Vec<Vec<Rational>> = rows
                .iter()
                .map(|r| cols.iter().map(|&j| r[j].clone()).collect())
                .collect();
            rank(&sub, NumericMode::Exact) < k
        });
        if dependent {
            return Some(k);
        }
    }
    None
}

/// `max_{i≠j} |⟨g_i, g_j⟩| / (‖g_i‖ ‖g_j‖)`; zero for a single column.
pub fn mutual_incoherence(g: &Dictionary) -> Result<f64> {
    let norms = g.column_norms();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(LcgmError::DegenerateColumn(j));
    }
    let gram = g.matrix.transpose() * &g.matrix;
    let mut mu: f64 = 0.0;
    for i in 0..g.d() {
        for j in i + 1..g.d() {
            mu = mu.max(gram[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu.min(1.0))
}

/// `⌈1 + 1/μ⌉` clamped to `[2, d + 1]`; `μ = 0` gives `d + 1`.
pub fn incoherence_spark_bound(mu: f64, d: usize) -> usize {
    if mu <= 0.0 {
        return d + 1;
    }
    let raw = (1.0 + 1.0 / mu - 1e-9).ceil();
    if raw >= (d + 1) as f64 {
        d + 1
    } else {
        (raw as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Injectivity {
    Injective,
    NotInjective,
    Unknown,
}

impl Injectivity {
    pub fn as_option(self) -> Option<bool> {
        match self {
            Injectivity::Injective => Some(true),
            Injectivity::NotInjective => Some(false),
            Injectivity::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparkReport {
    pub d: usize,
    pub exact_spark: Option<usize>,
    /// Largest subset size shown independent by a partial search.
    pub independent_up_to: usize,
    pub lower_bound: usize,
    pub incoherence: f64,
    pub injective_on_s: BTreeMap<usize, Injectivity>,
}

impl SparkReport {
    /// Best certified lower bound on the spark.
    pub fn certified_lower_bound(&self) -> usize {
        self.exact_spark
            .unwrap_or(0)
            .max(self.lower_bound)
            .max(self.independent_up_to + 1)
    }
}

/// Spark report using brute force for `k ≤ max_k`, plus the incoherence
/// bound. `max_k = None` applies the default budget.
pub fn spark_report(g: &Dictionary, max_k: Option<usize>, rank_tol: f64) -> Result<SparkReport> {
    let d = g.d();
    let mu = mutual_incoherence(g)?;
    let lower_bound = incoherence_spark_bound(mu, d);
    let budget = max_k.unwrap_or(if d <= SPARK_MAX_D { SPARK_MAX_K } else { 0 });
    let budget = budget.min(d);
    let (exact_spark, independent_up_to) = match spark_bruteforce(g, budget, rank_tol) {
        Some(k) => (Some(k), k - 1),
        None if budget == d => (Some(d + 1), d),
        None => (None, budget),
    };
    let mut report = SparkReport {
        d,
        exact_spark,
        independent_up_to,
        lower_bound,
        incoherence: mu,
        injective_on_s: BTreeMap::new(),
    };
    for s in 1..=d.div_ceil(2) {
        let verdict = is_injective_on_sparse(&report, s);
        report.injective_on_s.insert(s, verdict);
    }
    Ok(report)
}

/// Injective on `s`-sparse vectors iff `spark > 2s`.
pub fn is_injective_on_sparse(report: &SparkReport, s: usize) -> Injectivity {
    match report.exact_spark {
        Some(k) if k > 2 * s => Injectivity::Injective,
        Some(_) => Injectivity::NotInjective,
        None if report.certified_lower_bound() > 2 * s => Injectivity::Injective,
        None => Injectivity::Unknown,
    }
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn gaussian_code(d: usize, support: Vec<usize>, rng: &mut impl Rng) -> SparseVector {
    let mut entries: Vec<(usize, f64)> = support
        .into_iter()
        .map(|j| (j, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    entries.sort_by_key(|e| e.0);
    SparseVector { dim: d, entries }
}

/// Support uniform over all subsets of size `≤ s`, Gaussian values on it.
pub fn sample_stratified(d: usize, s: usize, n: usize, seed: u64) -> Result<Vec<SparseVector>> {
    if s > d {
        return Err(LcgmError::InvalidArgument(format!("s = {s} exceeds d = {d}")));
    }
    let weights: Vec<f64> = (0..=s).map(|k| choose(d, k)).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = prng(seed);
    Ok((0..n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut k = s;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    k = i;
                    break;
                }
                u -= w;
            }
            let support = rand::seq::index::sample(&mut rng, d, k).into_vec();
            gaussian_code(d, support, &mut rng)
        })
        .collect())
}

/// Supports uniform among subsets of size exactly `s`.
pub fn sample_exact_sparsity(d: usize, s: usize, n: usize, rng: &mut impl Rng) -> Vec<SparseVector> {
    (0..n)
        .map(|_| {
            let support = rand::seq::index::sample(rng, d, s.min(d)).into_vec();
            gaussian_code(d, support, rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub code: SparseVector,
    pub residual_norm: f64,
}

/// Orthogonal matching pursuit: at most `s` atoms, stopping early once the
/// residual norm drops to `residual_tol`.
pub fn omp(g: &Dictionary, z: &DVector<f64>, s: usize, residual_tol: f64) -> Result<OmpResult> {
    let norms = g.column_norms();
    omp_with_norms(g, &norms, z, s, residual_tol)
}

pub(crate) fn omp_with_norms(
    g: &Dictionary,
    norms: &[f64],
    z: &DVector<f64>,
    s: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    if z.len() != g.p() {
        return Err(LcgmError::DomainMismatch(format!(
            "signal of length {} for dictionary with {} rows",
            z.len(),
            g.p()
        )));
    }
    let d = g.d();
    let mut support: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut residual = z.clone();
    let znorm = z.norm();
    for _ in 0..s.min(d).min(g.p()) {
        if residual.norm() <= residual_tol {
            break;
        }
        let corr = g.matrix.tr_mul(&residual);
        let best = (0..d)
            .filter(|j| !support.contains(j))
            .map(|j| (j, corr[j].abs() / norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, c)) = best else { break };
        if c <= 1e-13 * znorm.max(f64::MIN_POSITIVE) {
            break;
        }
        support.push(j);
        let sub = g.matrix.select_columns(&support);
        coef = match (sub.tr_mul(&sub)).cholesky() {
            Some(ch) => ch.solve(&sub.tr_mul(z)),
            None => sub
                .clone()
                .svd(true, true)
                .solve(z, 1e-12)
                .map_err(|e| LcgmError::InvariantViolation(e.to_string()))?,
        };
        residual = z - sub * &coef;
    }
    let code = SparseVector::new(d, support.iter().copied().zip(coef.iter().copied()).collect())?;
    Ok(OmpResult {
        code,
        residual_norm: residual.norm(),
    })
}

/// Exact best `s`-term approximation by enumerating all supports of size
/// `s`. Only practical when `C(d, s)` is small; the factorizations of every
/// support are computed once and reused across signals.
pub struct SubsetCoder {
    d: usize,
    gt: DMatrix<f64>,
    supports: Vec<(Vec<usize>, nalgebra::Cholesky<f64, nalgebra::Dyn>)>,
}

impl SubsetCoder {
    /// `None` when more than `max_supports` supports would be enumerated or
    /// every support is rank deficient.
    pub fn new(g: &Dictionary, s: usize, max_supports: usize) -> Option<Self> {
        let k = s.min(g.d()).min(g.p());
        if k == 0 || choose(g.d(), k) > max_supports as f64 {
            return None;
        }
        let supports: Vec<_> = (0..g.d())
            .combinations(k)
            .filter_map(|cols| {
                let sub = g.matrix.select_columns(&cols);
                let gram = sub.tr_mul(&sub);
                let ch = gram.cholesky()?;
                let diag = ch.l().diagonal();
                (diag.min() > 1e-8 * diag.max()).then_some((cols, ch))
            })
            .collect();
        (!supports.is_empty()).then(|| SubsetCoder {
            d: g.d(),
            gt: g.matrix.transpose(),
            supports,
        })
    }

    pub fn encode(&self, z: &DVector<f64>) -> SparseVector {
        let b = &self.gt * z;
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for (idx, (cols, ch)) in self.supports.iter().enumerate() {
            let bs = DVector::from_iterator(cols.len(), cols.iter().map(|&j| b[j]));
            let x = ch.solve(&bs);
            let gain = bs.dot(&x);
            if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                best = Some((gain, idx, x));
            }
        }
        match best {
            Some((gain, idx, x)) if gain > 0.0 => SparseVector {
                dim: self.d,
                entries: self.supports[idx].0.iter().copied().zip(x.iter().copied()).collect(),
            },
            _ => SparseVector::zeros(self.d),
        }
    }
}

/// `g_i ≈ scales[i] · g'_{permutation[i]}` for every atom `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalePermWitness {
    pub permutation: Vec<usize>,
    pub scales: Vec<f64>,
}

impl ScalePermWitness {
    pub fn identity(d: usize) -> Self {
        ScalePermWitness {
            permutation: (0..d).collect(),
            scales: vec![1.0; d],
        }
    }

    /// Witness for the reversed pair.
    pub fn inverse(&self) -> Self {
        let d = self.permutation.len();
        let mut permutation = vec![0; d];
        let mut scales = vec![0.0; d];
        for (i, &j) in self.permutation.iter().enumerate() {
            permutation[j] = i;
            scales[j] = 1.0 / self.scales[i];
        }
        ScalePermWitness {
            permutation,
            scales,
        }
    }

    /// Largest relative column residual `‖s_i g'_{π(i)} − g_i‖ / ‖g_i‖`.
    pub fn max_relative_error(&self, g: &Dictionary, g2: &Dictionary) -> f64 {
        (0..g.d())
            .map(|i| {
                let gi = g.matrix.column(i);
                let diff = g2.matrix.column(self.permutation[i]) * self.scales[i] - gi;
                diff.norm() / gi.norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchSolver {
    #[default]
    Assignment,
    Greedy,
}

/// `|⟨g_i, g'_j⟩| / (‖g_i‖ ‖g'_j‖)` for all pairs.
pub fn abs_correlations(g: &Dictionary, g2: &Dictionary) -> DMatrix<f64> {
    let a = g.normalized();
    let b = g2.normalized();
    (a.matrix.transpose() * b.matrix).map(f64::abs)
}

pub fn match_scale_permutation(
    g: &Dictionary,
    g2: &Dictionary,
    tol: f64,
) -> Result<Option<ScalePermWitness>> {
    match_scale_permutation_with(g, g2, tol, MatchSolver::Assignment)
}

/// Matches columns by absolute correlation. With the optimal scale the
/// relative residual of a pair is `sqrt(1 − corr²)`, so the assignment
/// minimizing the worst residual decides existence exactly.
pub fn match_scale_permutation_with(
    g: &Dictionary,
    g2: &Dictionary,
    tol: f64,
    solver: MatchSolver,
) -> Result<Option<ScalePermWitness>> {
    let witness = best_scale_permutation(g, g2, solver)?;
    Ok((witness.max_relative_error(g, g2) <= tol).then_some(witness))
}

/// The best-aligned scale-permutation regardless of tolerance.
pub fn best_scale_permutation(
    g: &Dictionary,
    g2: &Dictionary,
    solver: MatchSolver,
) -> Result<ScalePermWitness> {
    if g.p() != g2.p() || g.d() != g2.d() {
        return Err(LcgmError::DomainMismatch(format!(
            "dictionaries of shape {}×{} and {}×{}",
            g.p(),
            g.d(),
            g2.p(),
            g2.d()
        )));
    }
    let corr = abs_correlations(g, g2);
    let d = g.d();
    let cost: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (1.0 - corr[(i, j)].powi(2)).max(0.0).sqrt())
                .collect()
        })
        .collect();
    let permutation = match solver {
        MatchSolver::Assignment => assignment::bottleneck(&cost),
        MatchSolver::Greedy => assignment::greedy(&cost),
    };
    let scales = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let gj = g2.matrix.column(j);
            g.matrix.column(i).dot(&gj) / gj.norm_squared()
        })
        .collect();
    Ok(ScalePermWitness {
        permutation,
        scales,
    })
}

/// Matched absolute correlations `|corr(g_i, g'_{π(i)})|`.
pub fn matched_correlations(g: &Dictionary, g2: &Dictionary, w: &ScalePermWitness) -> Vec<f64> {
    let corr = abs_correlations(g, g2);
    w.permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| corr[(i, j)])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenPermDiagnosis {
    pub is_generalized_permutation: bool,
    pub sparsity_preserving: bool,
    pub probes_checked: usize,
    /// Support of the first probe whose image had more than `s` nonzeros.
    pub failing_probe: Option<Vec<usize>>,
    /// `sparsity_preserving ⇒ is_generalized_permutation` on this instance.
    pub implication_held: bool,
}

fn count_nonzero(v: &DVector<f64>, tol: f64) -> usize {
    let scale = v.amax();
    v.iter().filter(|x| x.abs() > tol * scale).count()
}

/// Tests whether an invertible `T` is a generalized permutation (every
/// `T e_i` 1-sparse) and, separately, whether it maps probed `s`-sparse
/// vectors to `s`-sparse vectors. Probes are the basis vectors, one Gaussian
/// vector per size-`s` support when there are at most 4096 of them, and
/// `random_probes` further random `s`-sparse vectors.
pub fn check_sparsity_preserving_is_genperm(
    t: &DMatrix<f64>,
    s: usize,
    tol: f64,
    random_probes: usize,
    seed: u64,
) -> Result<GenPermDiagnosis> {
    let d = t.nrows();
    if t.ncols() != d {
        return Err(LcgmError::DomainMismatch("T must be square".into()));
    }
    if s == 0 || s >= d {
        return Err(LcgmError::InvalidArgument(format!(
            "need 1 ≤ s ≤ d − 1, got s = {s}, d = {d}"
        )));
    }
    let sv = t.singular_values();
    if sv.min() <= 1e-12 * sv.max() || !sv.max().is_finite() {
        return Err(LcgmError::NotInvertible);
    }
    let is_genperm = (0..d).all(|j| count_nonzero(&t.column(j).into_owned(), tol) == 1);

    let mut rng = prng(seed);
    let mut probes: Vec<SparseVector> = (0..d)
        .map(|j| SparseVector {
            dim: d,
            entries: vec![(j, 1.0)],
        })
        .collect();
    if choose(d, s) <= 4096.0 {
        for support in (0..d).combinations(s) {
            probes.push(gaussian_code(d, support, &mut rng));
        }
    }
    probes.extend(sample_exact_sparsity(d, s, random_probes, &mut rng));

    let mut failing_probe = None;
    for c in &probes {
        let image = t * c.to_dense();
        if count_nonzero(&image, tol) > s {
            failing_probe = Some(c.support());
            break;
        }
    }
    let sparsity_preserving = failing_probe.is_none();
    Ok(GenPermDiagnosis {
        is_generalized_permutation: is_genperm,
        sparsity_preserving,
        probes_checked: probes.len(),
        failing_probe,
        implication_held: !sparsity_preserving || is_genperm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn dict(rows: &[&[f64]]) -> Dictionary {
        Dictionary::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_column_rejected() {
        assert_eq!(
            Dictionary::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]),
            Err(LcgmError::DegenerateColumn(1))
        );
    }

    #[test]
    fn identity_spark() {
        let g = Dictionary::new(DMatrix::identity(4, 4)).unwrap();
        assert_eq!(spark_bruteforce(&g, 4, DEFAULT_RANK_TOL), None);
        let r = spark_report(&g, None, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.exact_spark, Some(5));
        assert_eq!(r.incoherence, 0.0);
        assert_eq!(r.lower_bound, 5);
        assert_eq!(is_injective_on_sparse(&r, 1), Injectivity::Injective);
        assert_eq!(is_injective_on_sparse(&r, 2), Injectivity::Injective);
    }

    #[test]
    fn duplicated_column() {
        let g = dict(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 1.0]]);
        assert_eq!(spark_bruteforce(&g, 3, DEFAULT_RANK_TOL), Some(2));
        assert!((mutual_incoherence(&g).unwrap() - 1.0).abs() < 1e-15);
        let r = spark_report(&g, None, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.lower_bound, 2);
        assert_eq!(is_injective_on_sparse(&r, 1), Injectivity::NotInjective);
    }

    #[test]
    fn more_columns_than_rows() {
        let g = dict(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        assert_eq!(spark_bruteforce(&g, 3, DEFAULT_RANK_TOL), Some(3));
    }

    #[test]
    fn exact_spark_agrees() {
        let rows = vec![
            vec![ratio(1, 1), ratio(0, 1), ratio(1, 1), ratio(2, 1)],
            vec![ratio(0, 1), ratio(1, 1), ratio(1, 1), ratio(2, 1)],
            vec![ratio(0, 1), ratio(0, 1), ratio(0, 1), ratio(1, 3)],
        ];
        assert_eq!(spark_bruteforce_exact(&rows, 4), Some(3));
        let f: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(crate::numeric::Scalar::to_f64).collect())
            .collect();
        let g = Dictionary::from_rows(&f).unwrap();
        assert_eq!(spark_bruteforce(&g, 4, DEFAULT_RANK_TOL), Some(3));
    }

    #[test]
    fn incoherence_bound_clamps() {
        assert_eq!(incoherence_spark_bound(1.0, 5), 2);
        assert_eq!(incoherence_spark_bound(0.5, 5), 3);
        assert_eq!(incoherence_spark_bound(0.4, 5), 4);
        assert_eq!(incoherence_spark_bound(0.0, 5), 6);
        assert_eq!(incoherence_spark_bound(1e-6, 5), 6);
    }

    #[test]
    fn omp_single_atom_and_orthogonal() {
        let g = Dictionary::new(DMatrix::identity(3, 3)).unwrap();
        let z = DVector::from_vec(vec![0.0, 3.0, 0.0]);
        let r = omp(&g, &z, 2, 1e-12).unwrap();
        assert_eq!(r.code.entries(), &[(1, 3.0)]);
        assert_eq!(r.residual_norm, 0.0);

        let g = dict(&[&[1.0, 1.0], &[0.0, 0.0], &[1.0, -1.0]]);
        let z = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        let r = omp(&g, &z, 2, 1e-12).unwrap();
        assert_eq!(r.code.nnz(), 0);
        assert_eq!(r.residual_norm, 2.0);
    }

    #[test]
    fn stratified_sampler() {
        assert!(sample_stratified(3, 0, 10, 1).unwrap().iter().all(|c| c.nnz() == 0));
        let samples = sample_stratified(2, 2, 400, 3).unwrap();
        let supports: std::collections::BTreeSet<Vec<usize>> =
            samples.iter().map(|c| c.support()).collect();
        assert_eq!(supports.len(), 4);
        assert!(sample_stratified(5, 3, 200, 9).unwrap().iter().all(|c| c.nnz() <= 3));
        assert!(sample_stratified(2, 3, 1, 0).is_err());
    }

    #[test]
    fn witness_inverse_round_trip() {
        let w = ScalePermWitness {
            permutation: vec![2, 0, 1],
            scales: vec![2.0, -1.0, 0.5],
        };
        let back = w.inverse().inverse();
        assert_eq!(back.permutation, w.permutation);
        for (a, b) in back.scales.iter().zip(&w.scales) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn genperm_examples() {
        let t = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, -1.0, 3.0, 0.0, 0.0]);
        let r = check_sparsity_preserving_is_genperm(&t, 1, 1e-9, 10, 0).unwrap();
        assert!(r.is_generalized_permutation && r.sparsity_preserving && r.implication_held);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[h, -h, h, h]);
        let r = check_sparsity_preserving_is_genperm(&rot, 1, 1e-9, 10, 0).unwrap();
        assert!(!r.is_generalized_permutation && !r.sparsity_preserving);
        assert_eq!(r.failing_probe, Some(vec![0]));

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(
            check_sparsity_preserving_is_genperm(&singular, 1, 1e-9, 0, 0),
            Err(LcgmError::NotInvertible)
        );
    }
}
