//! Finite distributions, column-stochastic kernels and the operations between
//! them.
//!
//! Matrix convention: `rows[i][j]` is `K(target[i] | source[j])`, so every
//! column is a conditional distribution and a distribution is a column vector.

use std::collections::HashSet;

use num_rational::BigRational;

use crate::error::{LcgmError, Result};
use crate::numeric::{NumericMode, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<S> {
    labels: Vec<String>,
    probs: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel<S> {
    source: Vec<String>,
    target: Vec<String>,
    rows: Vec<Vec<S>>,
}

/// A latent concept generative model: concept distribution plus mixing kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Lcgm<S> {
    concept_dist: FiniteDistribution<S>,
    mixing: StochasticKernel<S>,
}

pub type ExactDistribution = FiniteDistribution<BigRational>;
pub type ExactKernel = StochasticKernel<BigRational>;
pub type ExactLcgm = Lcgm<BigRational>;

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(LcgmError::InvalidDistribution(format!(
                "duplicate {what} label `{l}`"
            )));
        }
    }
    Ok(())
}

fn labels_of(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

impl<S: Scalar> FiniteDistribution<S> {
    /// Validates under the scalar's default mode (exact for rationals).
    pub fn new(labels: Vec<String>, probs: Vec<S>) -> Result<Self> {
        Self::with_mode(labels, probs, S::default_mode())
    }

    pub fn with_mode(labels: Vec<String>, probs: Vec<S>, mode: NumericMode) -> Result<Self> {
        let d = FiniteDistribution { labels, probs };
        d.validate(mode)?;
        Ok(d)
    }

    pub fn from_strs(labels: &[&str], probs: Vec<S>) -> Result<Self> {
        Self::new(labels_of(labels), probs)
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(LcgmError::InvalidDistribution("no labels".into()));
        }
        let n = labels.len() as i64;
        let probs = vec![S::from_ratio(1, n); labels.len()];
        Self::new(labels, probs)
    }

    pub fn point_mass(labels: Vec<String>, at: &str) -> Result<Self> {
        let probs = labels
            .iter()
            .map(|l| if l == at { S::one() } else { S::zero() })
            .collect();
        Self::new(labels, probs)
    }

    pub(crate) fn from_parts_unchecked(labels: Vec<String>, probs: Vec<S>) -> Self {
        FiniteDistribution { labels, probs }
    }

    pub fn validate(&self, mode: NumericMode) -> Result<()> {
        if self.labels.len() != self.probs.len() {
            return Err(LcgmError::InvalidDistribution(format!(
                "{} labels but {} weights",
                self.labels.len(),
                self.probs.len()
            )));
        }
        if self.labels.is_empty() {
            return Err(LcgmError::InvalidDistribution("no labels".into()));
        }
        check_unique(&self.labels, "distribution")?;
        let mut total = S::zero();
        for (l, p) in self.labels.iter().zip(&self.probs) {
            if !mode.is_nonnegative(p) {
                return Err(LcgmError::InvalidDistribution(format!(
                    "negative weight {p} at `{l}`"
                )));
            }
            total = total + p.clone();
        }
        if !mode.eq(&total, &S::one()) {
            return Err(LcgmError::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn prob(&self, label: &str) -> Option<&S> {
        self.index_of(label).map(|i| &self.probs[i])
    }

    pub fn approx_eq(&self, other: &Self, mode: NumericMode) -> bool {
        self.labels == other.labels
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| mode.eq(a, b))
    }

    /// Indices of labels carrying positive mass under `mode`.
    pub fn support_indices(&self, mode: NumericMode) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| mode.is_positive(&self.probs[i]))
            .collect()
    }
}

impl FiniteDistribution<BigRational> {
    pub fn to_f64(&self) -> FiniteDistribution<f64> {
        FiniteDistribution {
            labels: self.labels.clone(),
            probs: self.probs.iter().map(Scalar::to_f64).collect(),
        }
    }
}

impl FiniteDistribution<f64> {
    /// Float-mode construction: entries in `[-tol, 0)` are clamped to zero and
    /// the weights renormalized. The flag reports whether clamping happened.
    pub fn clamped(labels: Vec<String>, probs: Vec<f64>, tol: f64) -> Result<(Self, bool)> {
        let mut clamped = false;
        let mut probs = probs;
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(LcgmError::InvalidDistribution(format!(
                    "non-finite weight {p}"
                )));
            }
            if *p < 0.0 && *p >= -tol {
                *p = 0.0;
                clamped = true;
            }
        }
        if clamped {
            let total: f64 = probs.iter().sum();
            if total > 0.0 {
                probs.iter_mut().for_each(|p| *p /= total);
            }
        }
        let d = Self::with_mode(labels, probs, NumericMode::Float(tol))?;
        Ok((d, clamped))
    }
}

impl<S: Scalar> StochasticKernel<S> {
    pub fn new(source: Vec<String>, target: Vec<String>, rows: Vec<Vec<S>>) -> Result<Self> {
        Self::with_mode(source, target, rows, S::default_mode())
    }

    pub fn with_mode(
        source: Vec<String>,
        target: Vec<String>,
        rows: Vec<Vec<S>>,
        mode: NumericMode,
    ) -> Result<Self> {
        let k = StochasticKernel {
            source,
            target,
            rows,
        };
        k.validate(mode)?;
        Ok(k)
    }

    pub fn from_strs(source: &[&str], target: &[&str], rows: Vec<Vec<S>>) -> Result<Self> {
        Self::new(labels_of(source), labels_of(target), rows)
    }

    pub(crate) fn from_parts_unchecked(
        source: Vec<String>,
        target: Vec<String>,
        rows: Vec<Vec<S>>,
    ) -> Self {
        StochasticKernel {
            source,
            target,
            rows,
        }
    }

    pub fn identity(labels: Vec<String>) -> Self {
        Self::dirac(labels.clone(), labels, |j| j).expect("identity is a valid kernel")
    }

    /// Dirac kernel of the index map `g`: column `j` is a point mass at
    /// `target[g(j)]`.
    pub fn dirac(
        source: Vec<String>,
        target: Vec<String>,
        g: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let mut rows = vec![vec![S::zero(); source.len()]; target.len()];
        for j in 0..source.len() {
            let i = g(j);
            if i >= target.len() {
                return Err(LcgmError::InvalidKernel(format!(
                    "map sends `{}` outside the target space",
                    source[j]
                )));
            }
            rows[i][j] = S::one();
        }
        Self::new(source, target, rows)
    }

    /// Builds a kernel from its columns (one conditional distribution per
    /// source label).
    pub fn from_columns(
        source: Vec<String>,
        target: Vec<String>,
        columns: Vec<Vec<S>>,
    ) -> Result<Self> {
        if columns.len() != source.len() {
            return Err(LcgmError::InvalidKernel(format!(
                "{} columns for {} source labels",
                columns.len(),
                source.len()
            )));
        }
        let mut rows = vec![Vec::with_capacity(source.len()); target.len()];
        for col in &columns {
            if col.len() != target.len() {
                return Err(LcgmError::InvalidKernel(format!(
                    "column of length {} for {} target labels",
                    col.len(),
                    target.len()
                )));
            }
            for (i, v) in col.iter().enumerate() {
                rows[i].push(v.clone());
            }
        }
        Self::new(source, target, rows)
    }

    pub fn validate(&self, mode: NumericMode) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(LcgmError::InvalidKernel("empty label set".into()));
        }
        check_unique(&self.source, "source").map_err(|e| LcgmError::InvalidKernel(e.to_string()))?;
        check_unique(&self.target, "target").map_err(|e| LcgmError::InvalidKernel(e.to_string()))?;
        if self.rows.len() != self.target.len() {
            return Err(LcgmError::InvalidKernel(format!(
                "{} rows for {} target labels",
                self.rows.len(),
                self.target.len()
            )));
        }
        if let Some(bad) = self.rows.iter().position(|r| r.len() != self.source.len()) {
            return Err(LcgmError::InvalidKernel(format!(
                "row {bad} has {} entries, expected {}",
                self.rows[bad].len(),
                self.source.len()
            )));
        }
        for j in 0..self.source.len() {
            let mut total = S::zero();
            for i in 0..self.target.len() {
                let v = &self.rows[i][j];
                if !mode.is_nonnegative(v) {
                    return Err(LcgmError::InvalidKernel(format!(
                        "negative entry {v} at ({}, {})",
                        self.target[i], self.source[j]
                    )));
                }
                total = total + v.clone();
            }
            if !mode.eq(&total, &S::one()) {
                return Err(LcgmError::InvalidKernel(format!(
                    "column `{}` sums to {total}, not 1",
                    self.source[j]
                )));
            }
        }
        Ok(())
    }

    pub fn source_labels(&self) -> &[String] {
        &self.source
    }

    pub fn target_labels(&self) -> &[String] {
        &self.target
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn entry(&self, target: usize, source: usize) -> &S {
        &self.rows[target][source]
    }

    pub fn column(&self, source: usize) -> Vec<S> {
        self.rows.iter().map(|r| r[source].clone()).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.target.len(), self.source.len())
    }

    /// Same kernel with target rows permuted into `order` (which must be a
    /// permutation of the current target labels).
    pub fn reorder_targets(&self, order: &[String]) -> Result<Self> {
        if order.len() != self.target.len() {
            return Err(LcgmError::DomainMismatch(
                "target label sets differ in size".into(),
            ));
        }
        let mut rows = Vec::with_capacity(order.len());
        for l in order {
            let i = self.target.iter().position(|t| t == l).ok_or_else(|| {
                LcgmError::DomainMismatch(format!("target label `{l}` not present"))
            })?;
            rows.push(self.rows[i].clone());
        }
        Ok(StochasticKernel {
            source: self.source.clone(),
            target: order.to_vec(),
            rows,
        })
    }

    /// Deterministic index map if every column is a point mass.
    pub fn as_function(&self, mode: NumericMode) -> Option<Vec<usize>> {
        (0..self.source.len())
            .map(|j| {
                let hits: Vec<usize> = (0..self.target.len())
                    .filter(|&i| !mode.is_zero(&self.rows[i][j]))
                    .collect();
                match hits.as_slice() {
                    [i] if mode.eq(&self.rows[*i][j], &S::one()) => Some(*i),
                    _ => None,
                }
            })
            .collect()
    }

    pub fn approx_eq(&self, other: &Self, mode: NumericMode) -> bool {
        self.source == other.source
            && self.target == other.target
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| mode.eq(x, y)))
    }
}

impl StochasticKernel<BigRational> {
    pub fn to_f64(&self) -> StochasticKernel<f64> {
        StochasticKernel {
            source: self.source.clone(),
            target: self.target.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }
}

impl<S: Scalar> Lcgm<S> {
    pub fn new(concept_dist: FiniteDistribution<S>, mixing: StochasticKernel<S>) -> Result<Self> {
        if concept_dist.labels() != mixing.source_labels() {
            return Err(LcgmError::DomainMismatch(format!(
                "concept labels {:?} differ from kernel source labels {:?}",
                concept_dist.labels(),
                mixing.source_labels()
            )));
        }
        Ok(Lcgm {
            concept_dist,
            mixing,
        })
    }

    pub fn concept_dist(&self) -> &FiniteDistribution<S> {
        &self.concept_dist
    }

    pub fn mixing(&self) -> &StochasticKernel<S> {
        &self.mixing
    }

    pub fn concept_labels(&self) -> &[String] {
        self.concept_dist.labels()
    }

    pub fn feature_labels(&self) -> &[String] {
        self.mixing.target_labels()
    }

    /// The induced concept extractor (posterior kernel).
    pub fn concept_extractor(&self, mode: NumericMode) -> Result<StochasticKernel<S>> {
        posterior(&self.mixing, &self.concept_dist, mode)
    }
}

impl Lcgm<BigRational> {
    pub fn to_f64(&self) -> Lcgm<f64> {
        Lcgm {
            concept_dist: self.concept_dist.to_f64(),
            mixing: self.mixing.to_f64(),
        }
    }
}

fn require_labels(what: &str, left: &[String], right: &[String]) -> Result<()> {
    if left != right {
        return Err(LcgmError::DomainMismatch(format!(
            "{what}: {left:?} vs {right:?}"
        )));
    }
    Ok(())
}

/// `KQ`: the distribution of a feature drawn through `k` from a concept drawn
/// from `q`.
pub fn pushforward<S: Scalar>(
    k: &StochasticKernel<S>,
    q: &FiniteDistribution<S>,
) -> Result<FiniteDistribution<S>> {
    require_labels(
        "distribution labels vs kernel source",
        q.labels(),
        k.source_labels(),
    )?;
    let probs = k
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(q.probs())
                .fold(S::zero(), |acc, (kz, qc)| acc + kz.clone() * qc.clone())
        })
        .collect();
    Ok(FiniteDistribution::from_parts_unchecked(
        k.target.clone(),
        probs,
    ))
}

/// `LK`: first `k`, then `l`.
pub fn compose<S: Scalar>(
    l: &StochasticKernel<S>,
    k: &StochasticKernel<S>,
) -> Result<StochasticKernel<S>> {
    require_labels(
        "inner kernel target vs outer kernel source",
        k.target_labels(),
        l.source_labels(),
    )?;
    let (n_mid, n_src) = k.shape();
    let rows = l
        .rows
        .iter()
        .map(|lrow| {
            (0..n_src)
                .map(|j| {
                    (0..n_mid).fold(S::zero(), |acc, m| {
                        acc + lrow[m].clone() * k.rows[m][j].clone()
                    })
                })
                .collect()
        })
        .collect();
    Ok(StochasticKernel::from_parts_unchecked(
        k.source.clone(),
        l.target.clone(),
        rows,
    ))
}

/// Bayes inverse of `k` under prior `q`. Columns of features with zero
/// marginal mass get the uniform distribution over `supp(q)`.
pub fn posterior<S: Scalar>(
    k: &StochasticKernel<S>,
    q: &FiniteDistribution<S>,
    mode: NumericMode,
) -> Result<StochasticKernel<S>> {
    let p = pushforward(k, q)?;
    let support = q.support_indices(mode);
    let n_src = k.source.len();
    let mut rows = vec![vec![S::zero(); k.target.len()]; n_src];
    for (z, pz) in p.probs().iter().enumerate() {
        if mode.is_zero(pz) {
            let w = S::from_ratio(1, support.len().max(1) as i64);
            for &c in &support {
                rows[c][z] = w.clone();
            }
        } else {
            for c in 0..n_src {
                rows[c][z] = k.rows[z][c].clone() * q.probs()[c].clone() / pz.clone();
            }
        }
    }
    Ok(StochasticKernel::from_parts_unchecked(
        k.target.clone(),
        k.source.clone(),
        rows,
    ))
}

/// Do `k` and `k2` agree on every column in `supp(q)`?
pub fn ae_equal<S: Scalar>(
    k: &StochasticKernel<S>,
    k2: &StochasticKernel<S>,
    q: &FiniteDistribution<S>,
    mode: NumericMode,
) -> Result<bool> {
    require_labels("kernel sources", k.source_labels(), k2.source_labels())?;
    require_labels("kernel targets", k.target_labels(), k2.target_labels())?;
    require_labels(
        "distribution labels vs kernel source",
        q.labels(),
        k.source_labels(),
    )?;
    Ok(q.support_indices(mode).into_iter().all(|c| {
        (0..k.target.len()).all(|z| mode.eq(&k.rows[z][c], &k2.rows[z][c]))
    }))
}

pub fn support<S: Scalar>(q: &FiniteDistribution<S>, mode: NumericMode) -> Vec<String> {
    q.support_indices(mode)
        .into_iter()
        .map(|i| q.labels()[i].clone())
        .collect()
}

pub fn feature_distribution<S: Scalar>(m: &Lcgm<S>) -> Result<FiniteDistribution<S>> {
    pushforward(m.mixing(), m.concept_dist())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn example_kernel() -> ExactKernel {
        StochasticKernel::from_strs(
            &["a", "b"],
            &["u", "v"],
            vec![
                vec![ratio(2, 3), ratio(0, 1)],
                vec![ratio(1, 3), ratio(1, 1)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FiniteDistribution::from_strs(&["a", "a"], vec![ratio(1, 2), ratio(1, 2)]).is_err());
        assert!(FiniteDistribution::from_strs(&["a", "b"], vec![ratio(1, 2), ratio(1, 3)]).is_err());
        assert!(FiniteDistribution::from_strs(&["a", "b"], vec![ratio(3, 2), ratio(-1, 2)]).is_err());
        // the printed Example-2 matrix: rows sum to one, columns do not
        let printed = StochasticKernel::from_strs(
            &["a", "b"],
            &["u", "v"],
            vec![
                vec![ratio(2, 3), ratio(1, 3)],
                vec![ratio(0, 1), ratio(1, 1)],
            ],
        );
        assert!(matches!(printed, Err(LcgmError::InvalidKernel(_))));
    }

    #[test]
    fn pushforward_identity() {
        let q = FiniteDistribution::from_strs(&["a", "b"], vec![0.3, 0.7]).unwrap();
        let id = StochasticKernel::<f64>::identity(q.labels().to_vec());
        assert_eq!(pushforward(&id, &q).unwrap().probs(), &[0.3, 0.7]);
    }

    #[test]
    fn pushforward_label_mismatch() {
        let q = FiniteDistribution::from_strs(&["x", "y"], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        assert!(matches!(
            pushforward(&example_kernel(), &q),
            Err(LcgmError::DomainMismatch(_))
        ));
    }

    #[test]
    fn posterior_of_permutation_is_inverse() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let g = [2usize, 0, 1];
        let k = StochasticKernel::<BigRational>::dirac(labels.clone(), labels.clone(), |j| g[j])
            .unwrap();
        let q = FiniteDistribution::new(labels.clone(), vec![ratio(1, 2), ratio(1, 3), ratio(1, 6)])
            .unwrap();
        let h = posterior(&k, &q, NumericMode::Exact).unwrap();
        let mut inv = [0usize; 3];
        for (j, &i) in g.iter().enumerate() {
            inv[i] = j;
        }
        let expected =
            StochasticKernel::<BigRational>::dirac(labels.clone(), labels, |i| inv[i]).unwrap();
        assert_eq!(h, expected);
    }

    #[test]
    fn posterior_zero_mass_column_is_uniform_on_support() {
        // feature w is never produced
        let k = StochasticKernel::from_strs(
            &["a", "b", "c"],
            &["u", "w"],
            vec![
                vec![ratio(1, 1), ratio(1, 1), ratio(1, 1)],
                vec![ratio(0, 1), ratio(0, 1), ratio(0, 1)],
            ],
        )
        .unwrap();
        let q = FiniteDistribution::from_strs(&["a", "b", "c"], vec![ratio(1, 2), ratio(0, 1), ratio(1, 2)])
            .unwrap();
        let h = posterior(&k, &q, NumericMode::Exact).unwrap();
        assert_eq!(h.column(1), vec![ratio(1, 2), ratio(0, 1), ratio(1, 2)]);
        h.validate(NumericMode::Exact).unwrap();
    }

    #[test]
    fn ae_equal_ignores_off_support_columns() {
        let k = example_kernel();
        let k2 = StochasticKernel::from_strs(
            &["a", "b"],
            &["u", "v"],
            vec![
                vec![ratio(2, 3), ratio(1, 1)],
                vec![ratio(1, 3), ratio(0, 1)],
            ],
        )
        .unwrap();
        let on_a = FiniteDistribution::from_strs(&["a", "b"], vec![ratio(1, 1), ratio(0, 1)]).unwrap();
        let both = FiniteDistribution::from_strs(&["a", "b"], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        assert!(ae_equal(&k, &k, &both, NumericMode::Exact).unwrap());
        assert!(ae_equal(&k, &k2, &on_a, NumericMode::Exact).unwrap());
        assert!(!ae_equal(&k, &k2, &both, NumericMode::Exact).unwrap());
    }

    #[test]
    fn ae_equal_tolerance() {
        let k = StochasticKernel::from_strs(&["a"], &["u", "v"], vec![vec![0.5], vec![0.5]]).unwrap();
        let k2 = StochasticKernel::from_strs(
            &["a"],
            &["u", "v"],
            vec![vec![0.5 + 1e-12], vec![0.5 - 1e-12]],
        )
        .unwrap();
        let q = FiniteDistribution::from_strs(&["a"], vec![1.0]).unwrap();
        assert!(ae_equal(&k, &k2, &q, NumericMode::Float(1e-9)).unwrap());
        assert!(!ae_equal(&k, &k2, &q, NumericMode::Exact).unwrap());
    }

    #[test]
    fn support_under_modes() {
        let q = FiniteDistribution::from_strs(&["a", "b"], vec![ratio(3, 4), ratio(1, 4)]).unwrap();
        assert_eq!(support(&q, NumericMode::Exact), vec!["a", "b"]);
        let q = FiniteDistribution::from_strs(&["a", "b"], vec![ratio(1, 1), ratio(0, 1)]).unwrap();
        assert_eq!(support(&q, NumericMode::Exact), vec!["a"]);
        let q = FiniteDistribution::from_strs(&["a", "b", "c"], vec![0.5, 1e-12, 0.5 - 1e-12]).unwrap();
        assert_eq!(support(&q, NumericMode::Float(1e-9)), vec!["a", "c"]);
    }

    #[test]
    fn clamping_flags_tiny_negatives() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        let (d, flagged) = FiniteDistribution::clamped(labels.clone(), vec![1.0 + 1e-12, -1e-12], 1e-9).unwrap();
        assert!(flagged);
        assert_eq!(d.probs(), &[1.0, 0.0]);
        let (_, flagged) = FiniteDistribution::clamped(labels.clone(), vec![0.5, 0.5], 1e-9).unwrap();
        assert!(!flagged);
        assert!(FiniteDistribution::clamped(labels, vec![1.1, -0.1], 1e-9).is_err());
    }

    #[test]
    fn lcgm_requires_matching_labels() {
        let q = FiniteDistribution::from_strs(&["b", "a"], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        assert!(Lcgm::new(q, example_kernel()).is_err());
    }

    #[test]
    fn reorder_and_as_function() {
        let k = example_kernel();
        let r = k.reorder_targets(&["v".into(), "u".into()]).unwrap();
        assert_eq!(r.entry(0, 0), &ratio(1, 3));
        assert!(k.as_function(NumericMode::Exact).is_none());
        let id = StochasticKernel::<BigRational>::identity(vec!["a".into(), "b".into()]);
        assert_eq!(id.as_function(NumericMode::Exact), Some(vec![0, 1]));
    }
}
