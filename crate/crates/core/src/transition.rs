//! Valid transition sets on a finite concept space `[d]` and the
//! intersection certificate for identifiability up to a transition group.
//!
//! Injective self-maps of a finite set are permutations, so every transition
//! is stored as a permutation of label indices. Classes are represented by
//! finite samples plus predicates; a certificate is exact for the sampled
//! sub-class only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{LcgmError, Result};
use crate::kernel::{ae_equal, compose, pushforward, FiniteDistribution, StochasticKernel};
use crate::numeric::{NumericMode, Scalar};

/// Largest concept space for which all `d!` maps are enumerated.
pub const MAX_ENUMERATION_D: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionMap {
    images: Vec<usize>,
}

impl TransitionMap {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for (i, &j) in images.iter().enumerate() {
            if j >= n {
                return Err(LcgmError::InvalidTransition(format!(
                    "{i} maps to {j}, outside [0, {n})"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(LcgmError::InvalidTransition(format!(
                    "not injective: two labels map to {j}"
                )));
            }
        }
        Ok(TransitionMap { images })
    }

    pub fn identity(n: usize) -> Self {
        TransitionMap {
            images: (0..n).collect(),
        }
    }

    /// Label-level construction from a `label -> label` table.
    pub fn from_table(labels: &[String], table: &BTreeMap<String, String>) -> Result<Self> {
        let index = |l: &str| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| LcgmError::InvalidTransition(format!("unknown label `{l}`")))
        };
        if table.len() != labels.len() {
            return Err(LcgmError::InvalidTransition(format!(
                "table has {} entries for {} labels",
                table.len(),
                labels.len()
            )));
        }
        let mut images = vec![0; labels.len()];
        for (from, to) in table {
            images[index(from)?] = index(to)?;
        }
        Self::new(images)
    }

    pub fn to_table(&self, labels: &[String]) -> BTreeMap<String, String> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, &j)| (labels[i].clone(), labels[j].clone()))
            .collect()
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<TransitionMap> {
        (0..n)
            .permutations(n)
            .map(|images| TransitionMap { images })
            .collect()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        TransitionMap { images: inv }
    }

    /// `self ∘ other`.
    pub fn after(&self, other: &Self) -> Self {
        TransitionMap {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        }
    }

    pub fn dirac<S: Scalar>(&self, labels: &[String]) -> Result<StochasticKernel<S>> {
        if labels.len() != self.images.len() {
            return Err(LcgmError::InvalidTransition(format!(
                "map on {} labels applied to {}",
                self.images.len(),
                labels.len()
            )));
        }
        StochasticKernel::dirac(labels.to_vec(), labels.to_vec(), |j| self.images[j])
    }
}

impl fmt::Display for TransitionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.images.iter().join(" "))
    }
}

type ConceptEval<S> = Arc<dyn Fn(&FiniteDistribution<S>, NumericMode) -> bool + Send + Sync>;
type KernelEval<S> = Arc<dyn Fn(&StochasticKernel<S>, NumericMode) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum ConceptPredicate<S> {
    /// Mutually absolutely continuous with the base: same support.
    MeasureClassOf(FiniteDistribution<S>),
    FullSupport,
    Custom { name: String, eval: ConceptEval<S> },
}

#[derive(Clone)]
pub enum KernelPredicate<S> {
    DistinctColumns,
    /// Every column is a point mass and no two columns share it.
    DeterministicInjective,
    Custom { name: String, eval: KernelEval<S> },
}

impl<S: Scalar> ConceptPredicate<S> {
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&FiniteDistribution<S>, NumericMode) -> bool + Send + Sync + 'static,
    ) -> Self {
        ConceptPredicate::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// The singleton class `{q}`.
    pub fn equal_to(q: FiniteDistribution<S>) -> Self {
        Self::custom("equal_to", move |x, mode| x.approx_eq(&q, mode))
    }

    pub fn name(&self) -> String {
        match self {
            ConceptPredicate::MeasureClassOf(_) => "measure_class_of".into(),
            ConceptPredicate::FullSupport => "full_support".into(),
            ConceptPredicate::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, q: &FiniteDistribution<S>, mode: NumericMode) -> bool {
        match self {
            ConceptPredicate::MeasureClassOf(base) => {
                base.labels() == q.labels()
                    && base.support_indices(mode) == q.support_indices(mode)
            }
            ConceptPredicate::FullSupport => q.support_indices(mode).len() == q.len(),
            ConceptPredicate::Custom { eval, .. } => eval(q, mode),
        }
    }
}

impl<S: Scalar> KernelPredicate<S> {
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&StochasticKernel<S>, NumericMode) -> bool + Send + Sync + 'static,
    ) -> Self {
        KernelPredicate::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> String {
        match self {
            KernelPredicate::DistinctColumns => "distinct_columns".into(),
            KernelPredicate::DeterministicInjective => "deterministic_injective".into(),
            KernelPredicate::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, k: &StochasticKernel<S>, mode: NumericMode) -> bool {
        match self {
            KernelPredicate::DistinctColumns => {
                let n = k.source_labels().len();
                let cols: Vec<Vec<S>> = (0..n).map(|j| k.column(j)).collect();
                (0..n).tuple_combinations().all(|(a, b)| {
                    !cols[a].iter().zip(&cols[b]).all(|(x, y)| mode.eq(x, y))
                })
            }
            KernelPredicate::DeterministicInjective => match k.as_function(mode) {
                Some(g) => g.iter().collect::<BTreeSet<_>>().len() == g.len(),
                None => false,
            },
            KernelPredicate::Custom { eval, .. } => eval(k, mode),
        }
    }
}

impl<S> fmt::Debug for ConceptPredicate<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConceptPredicate::MeasureClassOf(_) => write!(f, "MeasureClassOf(..)"),
            ConceptPredicate::FullSupport => write!(f, "FullSupport"),
            ConceptPredicate::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl<S> fmt::Debug for KernelPredicate<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelPredicate::DistinctColumns => write!(f, "DistinctColumns"),
            KernelPredicate::DeterministicInjective => write!(f, "DeterministicInjective"),
            KernelPredicate::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

pub fn eval_concept_predicates<S: Scalar>(
    q: &FiniteDistribution<S>,
    preds: &[ConceptPredicate<S>],
    mode: NumericMode,
) -> Vec<bool> {
    preds.iter().map(|p| p.eval(q, mode)).collect()
}

pub fn eval_kernel_predicates<S: Scalar>(
    k: &StochasticKernel<S>,
    preds: &[KernelPredicate<S>],
    mode: NumericMode,
) -> Vec<bool> {
    preds.iter().map(|p| p.eval(k, mode)).collect()
}

fn check_candidates(candidates: &[TransitionMap], n: usize) -> Result<()> {
    match candidates.iter().find(|t| t.len() != n) {
        Some(t) => Err(LcgmError::InvalidTransition(format!(
            "map {t} is not defined on {n} labels"
        ))),
        None => Ok(()),
    }
}

/// `{τ : E_τ Q satisfies every predicate}`.
pub fn valid_measure_transitions<S: Scalar>(
    q: &FiniteDistribution<S>,
    preds: &[ConceptPredicate<S>],
    candidates: &[TransitionMap],
    mode: NumericMode,
) -> Result<BTreeSet<TransitionMap>> {
    check_candidates(candidates, q.len())?;
    let hits: Result<Vec<Option<TransitionMap>>> = candidates
        .par_iter()
        .map(|tau| {
            let moved = pushforward(&tau.dirac(q.labels())?, q)?;
            Ok(preds.iter().all(|p| p.eval(&moved, mode)).then(|| tau.clone()))
        })
        .collect();
    Ok(hits?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Membership {
    /// `K'` must coincide (a.e.) with one of the listed samples.
    #[default]
    Samples,
    /// Any kernel satisfying the predicates belongs to the class.
    Predicates,
}

#[derive(Debug, Clone)]
pub struct KernelClass<S> {
    pub samples: Vec<StochasticKernel<S>>,
    pub predicates: Vec<KernelPredicate<S>>,
    pub membership: Membership,
}

#[derive(Debug, Clone)]
pub struct ConceptClass<S> {
    pub samples: Vec<FiniteDistribution<S>>,
    pub predicates: Vec<ConceptPredicate<S>>,
}

impl<S: Scalar> KernelClass<S> {
    pub fn of_samples(samples: Vec<StochasticKernel<S>>) -> Self {
        KernelClass {
            samples,
            predicates: Vec::new(),
            membership: Membership::Samples,
        }
    }

    pub fn with_predicates(mut self, preds: Vec<KernelPredicate<S>>) -> Self {
        self.predicates = preds;
        self
    }

    pub fn with_membership(mut self, membership: Membership) -> Self {
        self.membership = membership;
        self
    }

    fn satisfies(&self, k: &StochasticKernel<S>, mode: NumericMode) -> bool {
        self.predicates.iter().all(|p| p.eval(k, mode))
    }

    fn describe(&self) -> String {
        let preds = self.predicates.iter().map(|p| p.name()).join(", ");
        match self.membership {
            Membership::Samples => format!("{} sampled kernels [{preds}]", self.samples.len()),
            Membership::Predicates => {
                format!("kernels satisfying [{preds}] ({} samples)", self.samples.len())
            }
        }
    }
}

/// `{τ : ∃ K' in the class with K = K' E_τ a.e. under base}`.
pub fn valid_kernel_transitions<S: Scalar>(
    k: &StochasticKernel<S>,
    class: &KernelClass<S>,
    candidates: &[TransitionMap],
    base: &FiniteDistribution<S>,
    mode: NumericMode,
) -> Result<BTreeSet<TransitionMap>> {
    if base.support_indices(mode).len() != base.len() {
        return Err(LcgmError::PreconditionFailed(vec![
            "base measure must have full support".into(),
        ]));
    }
    if base.labels() != k.source_labels() {
        return Err(LcgmError::DomainMismatch(
            "base measure and kernel live on different concept spaces".into(),
        ));
    }
    let labels = base.labels();
    check_candidates(candidates, labels.len())?;
    let members: Vec<&StochasticKernel<S>> = match class.membership {
        Membership::Samples => class
            .samples
            .iter()
            .filter(|s| class.satisfies(s, mode))
            .collect(),
        Membership::Predicates => Vec::new(),
    };

    let hits: Result<Vec<Option<TransitionMap>>> = candidates
        .par_iter()
        .map(|tau| {
            let e_tau = tau.dirac(labels)?;
            let found = match class.membership {
                Membership::Samples => {
                    let mut found = false;
                    for &kp in &members {
                        if kp.source_labels() != labels || kp.target_labels() != k.target_labels()
                        {
                            return Err(LcgmError::DomainMismatch(
                                "class member lives on different spaces".into(),
                            ));
                        }
                        if ae_equal(k, &compose(kp, &e_tau)?, base, mode)? {
                            found = true;
                            break;
                        }
                    }
                    found
                }
                // with full-support base and bijective τ the only candidate
                // is K E_{τ⁻¹}
                Membership::Predicates => {
                    let kp = compose(k, &tau.inverse().dirac(labels)?)?;
                    class.satisfies(&kp, mode) && ae_equal(k, &compose(&kp, &e_tau)?, base, mode)?
                }
            };
            Ok(found.then(|| tau.clone()))
        })
        .collect();
    Ok(hits?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupSpec {
    Permutations,
    Identity,
    Explicit(BTreeSet<TransitionMap>),
}

impl GroupSpec {
    /// Checks nonemptiness and closure under inverses and composition.
    pub fn explicit(maps: impl IntoIterator<Item = TransitionMap>) -> Result<Self> {
        let set: BTreeSet<TransitionMap> = maps.into_iter().collect();
        let Some(first) = set.iter().next() else {
            return Err(LcgmError::NotAGroup("empty set".into()));
        };
        let n = first.len();
        if set.iter().any(|t| t.len() != n) {
            return Err(LcgmError::NotAGroup("maps on different spaces".into()));
        }
        for a in &set {
            if !set.contains(&a.inverse()) {
                return Err(LcgmError::NotAGroup(format!("missing inverse of {a}")));
            }
            for b in &set {
                if !set.contains(&a.after(b)) {
                    return Err(LcgmError::NotAGroup(format!("missing {a} ∘ {b}")));
                }
            }
        }
        Ok(GroupSpec::Explicit(set))
    }

    pub fn contains(&self, tau: &TransitionMap) -> bool {
        match self {
            GroupSpec::Permutations => true,
            GroupSpec::Identity => tau.is_identity(),
            GroupSpec::Explicit(set) => set.contains(tau),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GroupSpec::Permutations => "permutations".into(),
            GroupSpec::Identity => "identity".into(),
            GroupSpec::Explicit(set) => format!("explicit({} maps)", set.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityCertificate {
    pub class_description: String,
    pub group: GroupSpec,
    pub concept_transitions: BTreeSet<TransitionMap>,
    pub kernel_transitions: BTreeSet<TransitionMap>,
    pub intersection: BTreeSet<TransitionMap>,
    pub verdict: bool,
    pub counterexample: Option<TransitionMap>,
}

impl IdentifiabilityCertificate {
    /// Re-checks group membership of the whole intersection.
    pub fn is_sound(&self) -> bool {
        let all_in = self.intersection.iter().all(|t| self.group.contains(t));
        match (&self.counterexample, self.verdict) {
            (None, true) => all_in,
            (Some(c), false) => !all_in && self.intersection.contains(c) && !self.group.contains(c),
            _ => false,
        }
    }
}

/// Enumerates every permutation of `[d]`, unions the valid transition sets
/// over the class samples, and checks that their intersection lies in `group`.
pub fn certify_identifiability<S: Scalar>(
    concepts: &ConceptClass<S>,
    kernels: &KernelClass<S>,
    group: &GroupSpec,
    d: usize,
    base: &FiniteDistribution<S>,
    mode: NumericMode,
) -> Result<IdentifiabilityCertificate> {
    if d > MAX_ENUMERATION_D {
        return Err(LcgmError::EnumerationBoundExceeded {
            d,
            max: MAX_ENUMERATION_D,
        });
    }
    if base.len() != d {
        return Err(LcgmError::DomainMismatch(format!(
            "base measure has {} labels, expected {d}",
            base.len()
        )));
    }
    if let GroupSpec::Explicit(set) = group {
        if set.iter().any(|t| t.len() != d) {
            return Err(LcgmError::DomainMismatch(
                "group maps act on a different space".into(),
            ));
        }
    }
    for q in &concepts.samples {
        if q.labels() != base.labels() {
            return Err(LcgmError::DomainMismatch(
                "concept sample labels differ from the base measure".into(),
            ));
        }
    }
    let candidates = TransitionMap::all(d);

    let mut concept_transitions = BTreeSet::new();
    for q in &concepts.samples {
        concept_transitions.extend(valid_measure_transitions(
            q,
            &concepts.predicates,
            &candidates,
            mode,
        )?);
    }
    let mut kernel_transitions = BTreeSet::new();
    for k in kernels.samples.iter().filter(|k| kernels.satisfies(k, mode)) {
        kernel_transitions.extend(valid_kernel_transitions(
            k,
            kernels,
            &candidates,
            base,
            mode,
        )?);
    }
    let intersection: BTreeSet<TransitionMap> = concept_transitions
        .intersection(&kernel_transitions)
        .cloned()
        .collect();
    let counterexample = intersection.iter().find(|t| !group.contains(t)).cloned();
    let concept_preds = concepts.predicates.iter().map(|p| p.name()).join(", ");
    let cert = IdentifiabilityCertificate {
        class_description: format!(
            "d = {d}; {} sampled concept distributions [{concept_preds}]; {}",
            concepts.samples.len(),
            kernels.describe()
        ),
        group: group.clone(),
        concept_transitions,
        kernel_transitions,
        verdict: counterexample.is_none(),
        counterexample,
        intersection,
    };
    debug_assert!(cert.is_sound());
    Ok(cert)
}
