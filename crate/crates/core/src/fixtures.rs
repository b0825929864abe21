//! Regression fixtures: small JSON documents pairing an input with the
//! exact outcome it must produce.
//!
//! ```json
//! {"name": "...", "kind": "pushforward_posterior", "input": {...}, "expected": {...}}
//! ```
//!
//! Kinds and their fields:
//! - `pushforward_posterior`: input `model`; expected `feature_dist`, `posterior`.
//! - `coarsening_witness`: input `model_a`, `model_b`, optional `witness`;
//!   expected `exists`, and `witness_valid` when a witness is given.
//! - `blackwell_relation`: input `model_a`, `model_b`; expected `relation`,
//!   `feature_equivalent`, optional `unconstrained_forward`/`unconstrained_backward`.
//! - `certificate`: input `class` (a class specification) or
//!   `mixture_class` (`{"d", "samples", "seed"}`); expected `verdict`.
//!
//! Everything runs in exact arithmetic.

use serde::Serialize;
use serde_json::Value;

use crate::blackwell::{
    blackwell_relation, find_coarsening_witness, unconstrained_coarsening, verify_coarsening,
    RelationKind, TransitionWitness,
};
use crate::error::{LcgmError, Result};
use crate::io::{
    class_spec_from_value, distribution_from_value, kernel_from_value, lcgm_from_value,
    parse_json, ClassSpec, JsonScalar,
};
use crate::kernel::{feature_distribution, posterior, FiniteDistribution, Lcgm, StochasticKernel};
use crate::numeric::{format_rational, NumericMode, Rational};
use crate::reference::mixture_class;
use crate::transition::{certify_identifiability, GroupSpec};

const EXACT: NumericMode = NumericMode::Exact;

#[derive(Debug, Clone)]
pub enum FixtureCheck {
    PushforwardPosterior {
        model: Lcgm<Rational>,
        feature_dist: FiniteDistribution<Rational>,
        posterior: StochasticKernel<Rational>,
    },
    CoarseningWitness {
        model_a: Lcgm<Rational>,
        model_b: Lcgm<Rational>,
        witness: Option<TransitionWitness<Rational>>,
        exists: bool,
        witness_valid: Option<bool>,
    },
    BlackwellRelation {
        model_a: Lcgm<Rational>,
        model_b: Lcgm<Rational>,
        relation: RelationKind,
        feature_equivalent: bool,
        unconstrained_forward: Option<Vec<Vec<Rational>>>,
        unconstrained_backward: Option<Vec<Vec<Rational>>>,
    },
    Certificate {
        class: ClassSpec<Rational>,
        verdict: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub check: FixtureCheck,
}

impl Fixture {
    pub fn kind(&self) -> &'static str {
        match self.check {
            FixtureCheck::PushforwardPosterior { .. } => "pushforward_posterior",
            FixtureCheck::CoarseningWitness { .. } => "coarsening_witness",
            FixtureCheck::BlackwellRelation { .. } => "blackwell_relation",
            FixtureCheck::Certificate { .. } => "certificate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureOutcome {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    /// One line per failed comparison, or the error that stopped the run.
    pub failures: Vec<String>,
}

fn err(msg: impl Into<String>) -> LcgmError {
    LcgmError::Parse(msg.into())
}

fn get<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| err(format!("{path}: missing field `{key}`")))
}

fn get_bool(v: &Value, key: &str, path: &str) -> Result<bool> {
    get(v, key, path)?
        .as_bool()
        .ok_or_else(|| err(format!("{path}.{key}: expected a boolean")))
}

fn rational_rows(v: &Value, path: &str) -> Result<Vec<Vec<Rational>>> {
    let rows = v.as_array().ok_or_else(|| err(format!("{path}: expected an array")))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let p = format!("{path}[{i}]");
            r.as_array()
                .ok_or_else(|| err(format!("{p}: expected an array")))?
                .iter()
                .enumerate()
                .map(|(j, x)| Rational::from_json(x, &format!("{p}[{j}]")))
                .collect()
        })
        .collect()
}

fn relation_kind(v: &Value, path: &str) -> Result<RelationKind> {
    Ok(match v.as_str() {
        Some("equivalent") => RelationKind::Equivalent,
        Some("coarser_only") => RelationKind::CoarserOnly,
        Some("finer_only") => RelationKind::FinerOnly,
        Some("incomparable") => RelationKind::Incomparable,
        _ => return Err(err(format!("{path}: unknown relation"))),
    })
}

fn generated_class(v: &Value) -> Result<ClassSpec<Rational>> {
    let path = "$.input.mixture_class";
    let num = |key: &str| {
        get(v, key, path)?
            .as_u64()
            .ok_or_else(|| err(format!("{path}.{key}: expected a non-negative integer")))
    };
    let (d, samples, seed) = (num("d")? as usize, num("samples")? as usize, num("seed")?);
    if !(1..=crate::transition::MAX_ENUMERATION_D).contains(&d) || !(1..=64).contains(&samples) {
        return Err(err(format!("{path}: d or samples out of range")));
    }
    let group = match v.get("group").and_then(Value::as_str) {
        None | Some("permutations") => GroupSpec::Permutations,
        Some("identity") => GroupSpec::Identity,
        Some(_) => return Err(err(format!("{path}.group: expected `permutations` or `identity`"))),
    };
    let class = mixture_class(d, samples, seed);
    Ok(ClassSpec {
        base: class.base,
        concepts: class.concepts,
        kernels: class.kernels,
        group,
    })
}

pub fn fixture_from_value(v: &Value) -> Result<Fixture> {
    let name = get(v, "name", "$")?
        .as_str()
        .ok_or_else(|| err("$.name: expected a string"))?
        .to_string();
    let description = v.get("description").and_then(Value::as_str).unwrap_or("").to_string();
    let kind = get(v, "kind", "$")?.as_str().unwrap_or("");
    let input = get(v, "input", "$")?;
    let expected = get(v, "expected", "$")?;
    let model = |key: &str| lcgm_from_value::<Rational>(get(input, key, "$.input")?, &format!("$.input.{key}"), EXACT);
    let check = match kind {
        "pushforward_posterior" => FixtureCheck::PushforwardPosterior {
            model: model("model")?,
            feature_dist: distribution_from_value(
                get(expected, "feature_dist", "$.expected")?,
                "$.expected.feature_dist",
                EXACT,
            )?,
            posterior: kernel_from_value(
                get(expected, "posterior", "$.expected")?,
                "$.expected.posterior",
                EXACT,
            )?,
        },
        "coarsening_witness" => {
            let witness = match input.get("witness") {
                Some(w) => Some(TransitionWitness {
                    kernel: kernel_from_value(w, "$.input.witness", EXACT)?,
                }),
                None => None,
            };
            let witness_valid = match witness {
                Some(_) => Some(get_bool(expected, "witness_valid", "$.expected")?),
                None => None,
            };
            FixtureCheck::CoarseningWitness {
                model_a: model("model_a")?,
                model_b: model("model_b")?,
                witness,
                exists: get_bool(expected, "exists", "$.expected")?,
                witness_valid,
            }
        }
        "blackwell_relation" => {
            let rows = |key: &str| {
                expected
                    .get(key)
                    .map(|r| rational_rows(r, &format!("$.expected.{key}")))
                    .transpose()
            };
            FixtureCheck::BlackwellRelation {
                model_a: model("model_a")?,
                model_b: model("model_b")?,
                relation: relation_kind(get(expected, "relation", "$.expected")?, "$.expected.relation")?,
                feature_equivalent: get_bool(expected, "feature_equivalent", "$.expected")?,
                unconstrained_forward: rows("unconstrained_forward")?,
                unconstrained_backward: rows("unconstrained_backward")?,
            }
        }
        "certificate" => {
            let class = match (input.get("class"), input.get("mixture_class")) {
                (Some(c), None) => class_spec_from_value(c, EXACT)
                    .map_err(|e| err(format!("$.input.class: {e}")))?,
                (None, Some(g)) => generated_class(g)?,
                _ => return Err(err("$.input: expected exactly one of `class`, `mixture_class`")),
            };
            FixtureCheck::Certificate {
                class,
                verdict: get_bool(expected, "verdict", "$.expected")?,
            }
        }
        other => return Err(err(format!("$.kind: unknown fixture kind `{other}`"))),
    };
    Ok(Fixture {
        name,
        description,
        check,
    })
}

pub fn parse_fixture(text: &str) -> Result<Fixture> {
    fixture_from_value(&parse_json(text)?)
}

fn show(rows: &[Vec<Rational>]) -> String {
    let rows: Vec<String> = rows
        .iter()
        .map(|r| r.iter().map(format_rational).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[[{}]]", rows.join("], ["))
}

fn compare_unconstrained(
    a: &Lcgm<Rational>,
    b: &Lcgm<Rational>,
    want: &Option<Vec<Vec<Rational>>>,
    label: &str,
    failures: &mut Vec<String>,
) -> Result<()> {
    let Some(want) = want else { return Ok(()) };
    match unconstrained_coarsening(a, b)? {
        Some((got, true)) if &got == want => {}
        Some((got, unique)) => failures.push(format!(
            "{label}: unconstrained solution {} (unique: {unique}), expected {}",
            show(&got),
            show(want)
        )),
        None => failures.push(format!("{label}: unconstrained system is infeasible")),
    }
    Ok(())
}

fn check(f: &Fixture) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    match &f.check {
        FixtureCheck::PushforwardPosterior {
            model,
            feature_dist,
            posterior: want,
        } => {
            let p = feature_distribution(model)?;
            if &p != feature_dist {
                failures.push(format!("feature distribution {:?}, expected {:?}", p.probs(), feature_dist.probs()));
            }
            let h = posterior(model.mixing(), model.concept_dist(), EXACT)?;
            if &h != want {
                failures.push(format!("posterior {}, expected {}", show(h.rows()), show(want.rows())));
            }
        }
        FixtureCheck::CoarseningWitness {
            model_a,
            model_b,
            witness,
            exists,
            witness_valid,
        } => {
            let found = find_coarsening_witness(model_a, model_b)?;
            match (&found, exists) {
                (Some(w), true) => {
                    if !verify_coarsening(model_a, model_b, w, EXACT)? {
                        failures.push("found witness fails verification".into());
                    }
                }
                (None, false) => {}
                (got, _) => failures.push(format!("witness exists: {}, expected {exists}", got.is_some())),
            }
            if let (Some(w), Some(valid)) = (witness, witness_valid) {
                let ok = verify_coarsening(model_a, model_b, w, EXACT)?;
                if ok != *valid {
                    failures.push(format!("given witness valid: {ok}, expected {valid}"));
                }
            }
        }
        FixtureCheck::BlackwellRelation {
            model_a,
            model_b,
            relation,
            feature_equivalent,
            unconstrained_forward,
            unconstrained_backward,
        } => {
            let v = blackwell_relation(model_a, model_b)?;
            if v.relation.kind() != *relation {
                failures.push(format!("relation {:?}, expected {relation:?}", v.relation.kind()));
            }
            if v.feature_equivalent != *feature_equivalent {
                failures.push(format!(
                    "feature_equivalent {}, expected {feature_equivalent}",
                    v.feature_equivalent
                ));
            }
            compare_unconstrained(model_a, model_b, unconstrained_forward, "forward", &mut failures)?;
            compare_unconstrained(model_b, model_a, unconstrained_backward, "backward", &mut failures)?;
        }
        FixtureCheck::Certificate { class, verdict } => {
            let cert = certify_identifiability(
                &class.concepts,
                &class.kernels,
                &class.group,
                class.labels().len(),
                &class.base,
                EXACT,
            )?;
            if cert.verdict != *verdict {
                failures.push(format!("verdict {}, expected {verdict}", cert.verdict));
            }
            if !cert.is_sound() {
                failures.push("certificate is not self-consistent".into());
            }
        }
    }
    Ok(failures)
}

pub fn run_fixture(f: &Fixture) -> FixtureOutcome {
    let failures = check(f).unwrap_or_else(|e| vec![format!("error: {e}")]);
    FixtureOutcome {
        name: f.name.clone(),
        kind: f.kind().to_string(),
        passed: failures.is_empty(),
        failures,
    }
}
