//! Feature equivalence, Blackwell coarsening and Blackwell equivalence of
//! finite models.
//!
//! `M ⪯ M'` under `T` means `Q' = TQ` (measure refinement) and `K = K'T` on
//! `supp(Q)` (kernel coarsening). Existence of such a `T` is a linear
//! feasibility question, decided exactly by [`crate::lp`].

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{LcgmError, Result};
use crate::kernel::{ae_equal, compose, pushforward, Lcgm, StochasticKernel};
use crate::lp::{solve_feasibility, FeasibilitySystem};
use crate::numeric::{rank, rational_approx, NumericMode, Rational, Scalar};
use crate::FiniteDistribution;

/// A transition kernel from the concepts of one model to those of another.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionWitness<S> {
    pub kernel: StochasticKernel<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlackwellRelation<S> {
    Equivalent {
        forward: TransitionWitness<S>,
        backward: TransitionWitness<S>,
    },
    /// `M ⪯ M'` only.
    CoarserOnly { forward: TransitionWitness<S> },
    /// `M' ⪯ M` only.
    FinerOnly { backward: TransitionWitness<S> },
    Incomparable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackwellVerdict<S> {
    pub relation: BlackwellRelation<S>,
    pub feature_equivalent: bool,
    /// Set when the verdict came from rounded float inputs.
    pub heuristic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Equivalent,
    CoarserOnly,
    FinerOnly,
    Incomparable,
}

impl<S> BlackwellRelation<S> {
    pub fn kind(&self) -> RelationKind {
        match self {
            BlackwellRelation::Equivalent { .. } => RelationKind::Equivalent,
            BlackwellRelation::CoarserOnly { .. } => RelationKind::CoarserOnly,
            BlackwellRelation::FinerOnly { .. } => RelationKind::FinerOnly,
            BlackwellRelation::Incomparable => RelationKind::Incomparable,
        }
    }

    pub fn forward(&self) -> Option<&TransitionWitness<S>> {
        match self {
            BlackwellRelation::Equivalent { forward, .. }
            | BlackwellRelation::CoarserOnly { forward } => Some(forward),
            _ => None,
        }
    }

    pub fn backward(&self) -> Option<&TransitionWitness<S>> {
        match self {
            BlackwellRelation::Equivalent { backward, .. }
            | BlackwellRelation::FinerOnly { backward } => Some(backward),
            _ => None,
        }
    }

    fn from_directions(
        forward: Option<TransitionWitness<S>>,
        backward: Option<TransitionWitness<S>>,
    ) -> Self {
        match (forward, backward) {
            (Some(forward), Some(backward)) => BlackwellRelation::Equivalent { forward, backward },
            (Some(forward), None) => BlackwellRelation::CoarserOnly { forward },
            (None, Some(backward)) => BlackwellRelation::FinerOnly { backward },
            (None, None) => BlackwellRelation::Incomparable,
        }
    }
}

/// Mixing kernel of `other` with its feature rows put in the order used by
/// `reference`.
fn aligned_mixing<S: Scalar>(reference: &Lcgm<S>, other: &Lcgm<S>) -> Result<StochasticKernel<S>> {
    let mut a = reference.feature_labels().to_vec();
    let mut b = other.feature_labels().to_vec();
    a.sort();
    b.sort();
    if a != b {
        return Err(LcgmError::DomainMismatch(format!(
            "feature spaces differ: {:?} vs {:?}",
            reference.feature_labels(),
            other.feature_labels()
        )));
    }
    if reference.feature_labels() == other.feature_labels() {
        Ok(other.mixing().clone())
    } else {
        other.mixing().reorder_targets(reference.feature_labels())
    }
}

pub fn is_feature_equivalent<S: Scalar>(
    m: &Lcgm<S>,
    m2: &Lcgm<S>,
    mode: NumericMode,
) -> Result<bool> {
    let k2 = aligned_mixing(m, m2)?;
    let p = pushforward(m.mixing(), m.concept_dist())?;
    let p2 = pushforward(&k2, m2.concept_dist())?;
    Ok(p.approx_eq(&p2, mode))
}

/// Linear system in the entries of `T` (variable `c' * |C| + c` holds
/// `T(c' | c)`): column sums, measure refinement, and kernel coarsening on
/// `supp(Q)`. With `nonneg = false` the entries of `T` are left free.
pub fn coarsening_system(m: &Lcgm<Rational>, m2: &Lcgm<Rational>, nonneg: bool) -> Result<FeasibilitySystem> {
    let k2 = aligned_mixing(m, m2)?;
    let n = m.concept_labels().len();
    let n2 = m2.concept_labels().len();
    let var = |cp: usize, c: usize| cp * n + c;
    let mut sys = FeasibilitySystem::new(n * n2);
    if nonneg {
        sys = sys.all_nonneg();
    }

    for c in 0..n {
        let mut row = vec![Rational::zero(); n * n2];
        for cp in 0..n2 {
            row[var(cp, c)] = Rational::one();
        }
        sys.add_equality(row, Rational::one());
    }

    let q = m.concept_dist().probs();
    for cp in 0..n2 {
        let mut row = vec![Rational::zero(); n * n2];
        for c in 0..n {
            row[var(cp, c)] = q[c].clone();
        }
        sys.add_equality(row, m2.concept_dist().probs()[cp].clone());
    }

    let k = m.mixing();
    for c in m.concept_dist().support_indices(NumericMode::Exact) {
        for z in 0..k.target_labels().len() {
            let mut row = vec![Rational::zero(); n * n2];
            for cp in 0..n2 {
                row[var(cp, c)] = k2.entry(z, cp).clone();
            }
            sys.add_equality(row, k.entry(z, c).clone());
        }
    }
    Ok(sys)
}

fn unflatten(x: &[Rational], n: usize, n2: usize) -> Vec<Vec<Rational>> {
    (0..n2).map(|cp| x[cp * n..(cp + 1) * n].to_vec()).collect()
}

/// Searches for `T` with `M ⪯ M'` under `T`; `None` iff no Markov kernel
/// works.
pub fn find_coarsening_witness(
    m: &Lcgm<Rational>,
    m2: &Lcgm<Rational>,
) -> Result<Option<TransitionWitness<Rational>>> {
    let sys = coarsening_system(m, m2, true)?;
    let res = solve_feasibility(&sys)?;
    let Some(x) = res.witness() else {
        return Ok(None);
    };
    let rows = unflatten(x, m.concept_labels().len(), m2.concept_labels().len());
    let kernel = StochasticKernel::new(
        m.concept_labels().to_vec(),
        m2.concept_labels().to_vec(),
        rows,
    )?;
    Ok(Some(TransitionWitness { kernel }))
}

/// Solution of the coarsening equations with the sign constraints on `T`
/// dropped, as a `|C'| x |C|` matrix, plus whether that solution is unique.
pub fn unconstrained_coarsening(
    m: &Lcgm<Rational>,
    m2: &Lcgm<Rational>,
) -> Result<Option<(Vec<Vec<Rational>>, bool)>> {
    let sys = coarsening_system(m, m2, false)?;
    let res = solve_feasibility(&sys)?;
    let Some(x) = res.witness() else {
        return Ok(None);
    };
    let coeffs: Vec<Vec<Rational>> = sys.equalities().iter().map(|(r, _)| r.clone()).collect();
    let unique = rank(&coeffs, NumericMode::Exact) == sys.num_vars();
    Ok(Some((
        unflatten(x, m.concept_labels().len(), m2.concept_labels().len()),
        unique,
    )))
}

/// Checks both coarsening conditions for the given `T`. When they hold, the
/// implied feature equivalence is re-checked and a failure is reported as an
/// [`LcgmError::InvariantViolation`].
pub fn verify_coarsening<S: Scalar>(
    m: &Lcgm<S>,
    m2: &Lcgm<S>,
    t: &TransitionWitness<S>,
    mode: NumericMode,
) -> Result<bool> {
    let t = &t.kernel;
    if t.source_labels() != m.concept_labels() || t.target_labels() != m2.concept_labels() {
        return Err(LcgmError::DomainMismatch(format!(
            "witness maps {:?} -> {:?}, expected {:?} -> {:?}",
            t.source_labels(),
            t.target_labels(),
            m.concept_labels(),
            m2.concept_labels()
        )));
    }
    let k2 = aligned_mixing(m, m2)?;
    let q = m.concept_dist();
    let refined = pushforward(t, q)?.approx_eq(m2.concept_dist(), mode);
    let coarsened = ae_equal(m.mixing(), &compose(&k2, t)?, q, mode)?;
    if !(refined && coarsened) {
        return Ok(false);
    }
    if !is_feature_equivalent(m, m2, mode)? {
        return Err(LcgmError::InvariantViolation(
            "coarsening holds but the feature distributions differ".into(),
        ));
    }
    Ok(true)
}

pub fn blackwell_relation(
    m: &Lcgm<Rational>,
    m2: &Lcgm<Rational>,
) -> Result<BlackwellVerdict<Rational>> {
    let (forward, backward) = rayon::join(
        || find_coarsening_witness(m, m2),
        || find_coarsening_witness(m2, m),
    );
    let (forward, backward) = (forward?, backward?);
    for (w, a, b) in [(&forward, m, m2), (&backward, m2, m)] {
        if let Some(w) = w {
            if !verify_coarsening(a, b, w, NumericMode::Exact)? {
                return Err(LcgmError::InvariantViolation(
                    "returned witness failed verification".into(),
                ));
            }
        }
    }
    let feature_equivalent = is_feature_equivalent(m, m2, NumericMode::Exact)?;
    let relation = BlackwellRelation::from_directions(forward, backward);
    if relation.kind() != RelationKind::Incomparable && !feature_equivalent {
        return Err(LcgmError::InvariantViolation(
            "comparable models must be feature equivalent".into(),
        ));
    }
    Ok(BlackwellVerdict {
        relation,
        feature_equivalent,
        heuristic: false,
    })
}

const ROUNDING_DENOM: i64 = 1_000_000;

fn rationalize_column(values: &[f64]) -> Result<Vec<Rational>> {
    let mut out: Vec<Rational> = values
        .iter()
        .map(|&v| {
            rational_approx(v.max(0.0), ROUNDING_DENOM)
                .ok_or_else(|| LcgmError::InvalidArgument(format!("cannot rationalize {v}")))
        })
        .collect::<Result<_>>()?;
    let total = out.iter().fold(Rational::zero(), |a, b| a + b);
    let deficit = Rational::one() - total;
    if let Some(imax) = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])) {
        out[imax] += deficit;
    }
    Ok(out)
}

fn rationalize(m: &Lcgm<f64>) -> Result<Lcgm<Rational>> {
    let q = FiniteDistribution::new(
        m.concept_labels().to_vec(),
        rationalize_column(m.concept_dist().probs())?,
    )?;
    let k = m.mixing();
    let columns = (0..k.source_labels().len())
        .map(|j| rationalize_column(&k.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let k = StochasticKernel::from_columns(
        k.source_labels().to_vec(),
        k.target_labels().to_vec(),
        columns,
    )?;
    Lcgm::new(q, k)
}

/// Float-input relation: rounds both models to nearby rationals, decides
/// exactly, and keeps only witnesses that pass a residual check against the
/// original float models. The verdict is flagged heuristic.
pub fn blackwell_relation_float(
    m: &Lcgm<f64>,
    m2: &Lcgm<f64>,
    tol: f64,
) -> Result<BlackwellVerdict<f64>> {
    let mode = NumericMode::float(tol)?;
    let exact = blackwell_relation(&rationalize(m)?, &rationalize(m2)?);
    let (forward, backward) = match exact {
        Ok(v) => (
            v.relation.forward().map(|w| w.kernel.to_f64()),
            v.relation.backward().map(|w| w.kernel.to_f64()),
        ),
        // rounding can break feature equivalence of comparable models
        Err(LcgmError::InvariantViolation(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let keep = |w: Option<StochasticKernel<f64>>, a: &Lcgm<f64>, b: &Lcgm<f64>| -> Result<_> {
        match w {
            Some(kernel) => {
                let w = TransitionWitness { kernel };
                Ok(match verify_coarsening(a, b, &w, mode) {
                    Ok(true) => Some(w),
                    Ok(false) | Err(LcgmError::InvariantViolation(_)) => None,
                    Err(e) => return Err(e),
                })
            }
            None => Ok(None),
        }
    };
    let forward = keep(forward, m, m2)?;
    let backward = keep(backward, m2, m)?;
    Ok(BlackwellVerdict {
        relation: BlackwellRelation::from_directions(forward, backward),
        feature_equivalent: is_feature_equivalent(m, m2, mode)?,
        heuristic: true,
    })
}

/// Full column rank, i.e. the pushforward map of a finite kernel is injective.
pub fn is_measure_separating<S: Scalar>(k: &StochasticKernel<S>, mode: NumericMode) -> bool {
    rank(k.rows(), mode) == k.source_labels().len()
}

/// Given `K = K'T` on `supp(Q)`, equal feature distributions and a
/// measure-separating `K'`, reports whether `Q' = TQ` (which must then hold).
pub fn check_lemma1_instance<S: Scalar>(
    m: &Lcgm<S>,
    m2: &Lcgm<S>,
    t: &TransitionWitness<S>,
    mode: NumericMode,
) -> Result<bool> {
    let t = &t.kernel;
    if t.source_labels() != m.concept_labels() || t.target_labels() != m2.concept_labels() {
        return Err(LcgmError::DomainMismatch(
            "witness labels do not match the concept spaces".into(),
        ));
    }
    let k2 = aligned_mixing(m, m2)?;
    let mut failed = Vec::new();
    if !is_measure_separating(&k2, mode) {
        failed.push("K' is not measure-separating (column rank deficient)".to_string());
    }
    if !ae_equal(m.mixing(), &compose(&k2, t)?, m.concept_dist(), mode)? {
        failed.push("K differs from K'T on supp(Q)".to_string());
    }
    if !is_feature_equivalent(m, m2, mode)? {
        failed.push("feature distributions differ".to_string());
    }
    if !failed.is_empty() {
        return Err(LcgmError::PreconditionFailed(failed));
    }
    Ok(pushforward(t, m.concept_dist())?.approx_eq(m2.concept_dist(), mode))
}
