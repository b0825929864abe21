//! JSON and CSV formats for models, class specifications and matrices, plus
//! a canonical JSON writer for reports.
//!
//! Exact numbers are written as strings (`"2/3"`, `"-1"`, `"0.25"`); JSON
//! numbers are also accepted and read through their decimal text, so `0.1`
//! means exactly `1/10`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::blackwell::{BlackwellVerdict, TransitionWitness};
use crate::dictionary::Dictionary;
use crate::error::{LcgmError, Result};
use crate::kernel::{FiniteDistribution, Lcgm, StochasticKernel};
use crate::mixture::{GaussianComponent, GaussianMixture};
use crate::numeric::{format_rational, parse_rational, NumericMode, Rational, Scalar};
use crate::sae::SaeModel;
use crate::transition::{
    ConceptClass, ConceptPredicate, GroupSpec, IdentifiabilityCertificate, KernelClass,
    KernelPredicate, Membership, TransitionMap,
};

/// Largest accepted input document, in bytes.
pub const MAX_INPUT_BYTES: usize = 64 << 20;

pub trait JsonScalar: Scalar {
    fn from_json(v: &Value, path: &str) -> Result<Self>;
    fn to_json(&self) -> Value;
}

impl JsonScalar for Rational {
    fn from_json(v: &Value, path: &str) -> Result<Self> {
        match v {
            Value::String(s) => parse_rational(s).map_err(|e| at(path, &e.to_string())),
            Value::Number(n) => parse_rational(&n.to_string())
                .ok()
                .or_else(|| n.as_f64().and_then(Rational::from_float))
                .ok_or_else(|| at(path, "number has no exact rational value")),
            _ => Err(at(path, "expected a number or a \"p/q\" string")),
        }
    }

    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }
}

impl JsonScalar for f64 {
    fn from_json(v: &Value, path: &str) -> Result<Self> {
        let x = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => match parse_rational(s) {
                Ok(r) => Some(r.to_f64()),
                Err(_) => s.trim().parse::<f64>().ok(),
            },
            _ => None,
        };
        match x {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(at(path, "expected a finite number")),
        }
    }

    fn to_json(&self) -> Value {
        json!(self)
    }
}

fn at(path: &str, msg: &str) -> LcgmError {
    LcgmError::Parse(format!("{path}: {msg}"))
}

/// Parses JSON text, reporting syntax errors with line and column.
pub fn parse_json(text: &str) -> Result<Value> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(LcgmError::Parse("input too large".into()));
    }
    serde_json::from_str(text).map_err(|e| {
        LcgmError::Parse(format!(
            "line {}, column {}: {}",
            e.line(),
            e.column(),
            e
        ))
    })
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.as_object()
        .ok_or_else(|| at(path, "expected an object"))?
        .get(key)
        .ok_or_else(|| at(path, &format!("missing field `{key}`")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| at(path, "expected an array"))
}

fn labels(v: &Value, path: &str) -> Result<Vec<String>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(at(&format!("{path}[{i}]"), "labels must be strings")),
        })
        .collect()
}

fn scalars<S: JsonScalar>(v: &Value, path: &str) -> Result<Vec<S>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| S::from_json(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix_rows<S: JsonScalar>(v: &Value, path: &str) -> Result<Vec<Vec<S>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| scalars(r, &format!("{path}[{i}]")))
        .collect()
}

fn with_path<T>(r: Result<T>, path: &str) -> Result<T> {
    r.map_err(|e| match e {
        LcgmError::Parse(_) => e,
        other => LcgmError::Parse(format!("{path}: {other}")),
    })
}

pub fn distribution_from_value<S: JsonScalar>(
    v: &Value,
    path: &str,
    mode: NumericMode,
) -> Result<FiniteDistribution<S>> {
    let l = labels(field(v, "labels", path)?, &format!("{path}.labels"))?;
    let p = scalars(field(v, "probs", path)?, &format!("{path}.probs"))?;
    with_path(FiniteDistribution::with_mode(l, p, mode), path)
}

pub fn kernel_from_value<S: JsonScalar>(
    v: &Value,
    path: &str,
    mode: NumericMode,
) -> Result<StochasticKernel<S>> {
    let source = labels(field(v, "source", path)?, &format!("{path}.source"))?;
    let target = labels(field(v, "target", path)?, &format!("{path}.target"))?;
    let rows = matrix_rows(field(v, "matrix", path)?, &format!("{path}.matrix"))?;
    with_path(StochasticKernel::with_mode(source, target, rows, mode), path)
}

pub fn lcgm_from_value<S: JsonScalar>(v: &Value, path: &str, mode: NumericMode) -> Result<Lcgm<S>> {
    let q = distribution_from_value(field(v, "concept_dist", path)?, &format!("{path}.concept_dist"), mode)?;
    let k = kernel_from_value(field(v, "mixing", path)?, &format!("{path}.mixing"), mode)?;
    with_path(Lcgm::new(q, k), path)
}

pub fn parse_distribution<S: JsonScalar>(text: &str, mode: NumericMode) -> Result<FiniteDistribution<S>> {
    distribution_from_value(&parse_json(text)?, "$", mode)
}

pub fn parse_kernel<S: JsonScalar>(text: &str, mode: NumericMode) -> Result<StochasticKernel<S>> {
    kernel_from_value(&parse_json(text)?, "$", mode)
}

pub fn parse_lcgm<S: JsonScalar>(text: &str, mode: NumericMode) -> Result<Lcgm<S>> {
    lcgm_from_value(&parse_json(text)?, "$", mode)
}

pub fn distribution_to_value<S: JsonScalar>(q: &FiniteDistribution<S>) -> Value {
    json!({
        "labels": q.labels(),
        "probs": q.probs().iter().map(JsonScalar::to_json).collect::<Vec<_>>(),
    })
}

pub fn kernel_to_value<S: JsonScalar>(k: &StochasticKernel<S>) -> Value {
    json!({
        "source": k.source_labels(),
        "target": k.target_labels(),
        "matrix": k.rows().iter()
            .map(|r| r.iter().map(JsonScalar::to_json).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

pub fn lcgm_to_value<S: JsonScalar>(m: &Lcgm<S>) -> Value {
    json!({
        "concept_dist": distribution_to_value(m.concept_dist()),
        "mixing": kernel_to_value(m.mixing()),
    })
}

/// A finite model class together with the transition group to certify.
#[derive(Debug, Clone)]
pub struct ClassSpec<S> {
    pub base: FiniteDistribution<S>,
    pub concepts: ConceptClass<S>,
    pub kernels: KernelClass<S>,
    pub group: GroupSpec,
}

impl<S: Scalar> ClassSpec<S> {
    pub fn labels(&self) -> &[String] {
        self.base.labels()
    }
}

fn transition_from_value(v: &Value, labels: &[String], path: &str) -> Result<TransitionMap> {
    let r = match v {
        Value::Array(items) => {
            let images = items
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| at(&format!("{path}[{i}]"), "expected a label index"))
                })
                .collect::<Result<Vec<_>>>()?;
            if images.len() != labels.len() {
                return Err(at(path, "map length differs from the number of labels"));
            }
            TransitionMap::new(images)
        }
        Value::Object(obj) => {
            let table = obj
                .iter()
                .map(|(k, x)| match x {
                    Value::String(s) => Ok((k.clone(), s.clone())),
                    _ => Err(at(path, "table values must be labels")),
                })
                .collect::<Result<_>>()?;
            TransitionMap::from_table(labels, &table)
        }
        _ => return Err(at(path, "expected an index array or a label table")),
    };
    with_path(r, path)
}

pub fn transition_to_value(t: &TransitionMap, labels: &[String]) -> Value {
    json!(t.to_table(labels))
}

pub fn class_spec_from_value<S: JsonScalar>(v: &Value, mode: NumericMode) -> Result<ClassSpec<S>> {
    let labels = labels(field(v, "labels", "$")?, "$.labels")?;
    let obj = v.as_object().ok_or_else(|| at("$", "expected an object"))?;
    if let Some(d) = obj.get("d") {
        if d.as_u64() != Some(labels.len() as u64) {
            return Err(at("$.d", "does not match the number of labels"));
        }
    }
    let base = match obj.get("base") {
        Some(b) => distribution_from_value(b, "$.base", mode)?,
        None => with_path(FiniteDistribution::uniform(labels.clone()), "$.labels")?,
    };
    if base.labels() != labels.as_slice() {
        return Err(at("$.base", "labels differ from `labels`"));
    }

    let concepts_v = field(v, "concepts", "$")?;
    let mut concept_samples = Vec::new();
    for (i, q) in array(field(concepts_v, "samples", "$.concepts")?, "$.concepts.samples")?
        .iter()
        .enumerate()
    {
        concept_samples.push(distribution_from_value(q, &format!("$.concepts.samples[{i}]"), mode)?);
    }
    let mut concept_preds = Vec::new();
    if let Some(ps) = concepts_v.get("predicates") {
        for (i, p) in array(ps, "$.concepts.predicates")?.iter().enumerate() {
            let path = format!("$.concepts.predicates[{i}]");
            concept_preds.push(match p {
                Value::String(s) if s == "full_support" => ConceptPredicate::FullSupport,
                Value::String(s) if s == "measure_class_of_base" => {
                    ConceptPredicate::MeasureClassOf(base.clone())
                }
                Value::Object(o) if o.len() == 1 && o.contains_key("measure_class_of") => {
                    ConceptPredicate::MeasureClassOf(distribution_from_value(
                        &o["measure_class_of"],
                        &format!("{path}.measure_class_of"),
                        mode,
                    )?)
                }
                Value::Object(o) if o.len() == 1 && o.contains_key("equal_to") => {
                    ConceptPredicate::equal_to(distribution_from_value(
                        &o["equal_to"],
                        &format!("{path}.equal_to"),
                        mode,
                    )?)
                }
                _ => return Err(at(&path, "unknown concept predicate")),
            });
        }
    }

    let kernels_v = field(v, "kernels", "$")?;
    let mut kernel_samples = Vec::new();
    for (i, k) in array(field(kernels_v, "samples", "$.kernels")?, "$.kernels.samples")?
        .iter()
        .enumerate()
    {
        kernel_samples.push(kernel_from_value(k, &format!("$.kernels.samples[{i}]"), mode)?);
    }
    let mut kernel_preds = Vec::new();
    if let Some(ps) = kernels_v.get("predicates") {
        for (i, p) in array(ps, "$.kernels.predicates")?.iter().enumerate() {
            kernel_preds.push(match p.as_str() {
                Some("distinct_columns") => KernelPredicate::DistinctColumns,
                Some("deterministic_injective") => KernelPredicate::DeterministicInjective,
                _ => return Err(at(&format!("$.kernels.predicates[{i}]"), "unknown kernel predicate")),
            });
        }
    }
    let membership = match kernels_v.get("membership").map(Value::as_str) {
        None | Some(Some("samples")) => Membership::Samples,
        Some(Some("predicates")) => Membership::Predicates,
        _ => return Err(at("$.kernels.membership", "expected `samples` or `predicates`")),
    };

    let group = match field(v, "group", "$")? {
        Value::String(s) if s == "permutations" => GroupSpec::Permutations,
        Value::String(s) if s == "identity" => GroupSpec::Identity,
        Value::Object(o) if o.len() == 1 && o.contains_key("explicit") => {
            let maps = array(&o["explicit"], "$.group.explicit")?
                .iter()
                .enumerate()
                .map(|(i, m)| transition_from_value(m, &labels, &format!("$.group.explicit[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            with_path(GroupSpec::explicit(maps), "$.group")?
        }
        _ => return Err(at("$.group", "expected `permutations`, `identity` or {\"explicit\": [...]}")),
    };

    Ok(ClassSpec {
        base,
        concepts: ConceptClass {
            samples: concept_samples,
            predicates: concept_preds,
        },
        kernels: KernelClass {
            samples: kernel_samples,
            predicates: kernel_preds,
            membership,
        },
        group,
    })
}

pub fn parse_class_spec<S: JsonScalar>(text: &str, mode: NumericMode) -> Result<ClassSpec<S>> {
    class_spec_from_value(&parse_json(text)?, mode)
}

fn real_rows(v: &Value, path: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = matrix_rows(v, path)?;
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(at(path, "empty matrix"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != m) {
        return Err(at(&format!("{path}[{i}]"), &format!("expected {m} entries")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `{"matrix": [[...], ...]}` or a bare array of rows.
pub fn matrix_from_value(v: &Value) -> Result<DMatrix<f64>> {
    match v {
        Value::Array(_) => real_rows(v, "$"),
        _ => real_rows(field(v, "matrix", "$")?, "$.matrix"),
    }
}

pub fn parse_matrix_json(text: &str) -> Result<DMatrix<f64>> {
    matrix_from_value(&parse_json(text)?)
}

pub fn parse_dictionary_json(text: &str) -> Result<Dictionary> {
    with_path(Dictionary::new(parse_matrix_json(text)?), "$.matrix")
}

pub fn dictionary_to_value(g: &Dictionary) -> Value {
    json!({ "matrix": g.to_rows() })
}

/// Numeric CSV; a first row that does not parse as numbers is a header.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(LcgmError::Parse("input too large".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| LcgmError::Parse(format!("csv: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) if r.iter().all(|x| x.is_finite()) => {
                if let Some(first) = rows.first() {
                    if first.len() != r.len() {
                        return Err(LcgmError::Parse(format!(
                            "line {line}: expected {} fields, found {}",
                            first.len(),
                            r.len()
                        )));
                    }
                }
                rows.push(r);
            }
            Ok(_) => return Err(LcgmError::Parse(format!("line {line}: non-finite value"))),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => return Err(LcgmError::Parse(format!("line {line}: {e}"))),
        }
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(LcgmError::Parse("csv: no numeric rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn mixture_from_value(v: &Value) -> Result<GaussianMixture> {
    let weights: Vec<f64> = scalars(field(v, "weights", "$")?, "$.weights")?;
    let comps = array(field(v, "components", "$")?, "$.components")?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let path = format!("$.components[{i}]");
            let mean: Vec<f64> = scalars(field(c, "mean", &path)?, &format!("{path}.mean"))?;
            let cov = real_rows(field(c, "covariance", &path)?, &format!("{path}.covariance"))?;
            with_path(GaussianComponent::new(DVector::from_vec(mean), cov), &path)
        })
        .collect::<Result<Vec<_>>>()?;
    with_path(GaussianMixture::new(weights, comps), "$")
}

pub fn parse_mixture_json(text: &str) -> Result<GaussianMixture> {
    mixture_from_value(&parse_json(text)?)
}

pub fn mixture_to_value(m: &GaussianMixture) -> Value {
    json!({
        "weights": m.weights(),
        "components": m.components().iter().map(|c| json!({
            "mean": c.mean().iter().collect::<Vec<_>>(),
            "covariance": rows_of(c.covariance()),
        })).collect::<Vec<_>>(),
    })
}

pub fn sae_model_from_value(v: &Value) -> Result<SaeModel> {
    let decoder = with_path(Dictionary::new(real_rows(field(v, "decoder", "$")?, "$.decoder")?), "$.decoder")?;
    let s = field(v, "s", "$")?
        .as_u64()
        .ok_or_else(|| at("$.s", "expected a positive integer"))? as usize;
    let sigma = match v.get("noise_sigma") {
        Some(x) => f64::from_json(x, "$.noise_sigma")?,
        None => crate::sae::DEFAULT_SIGMA,
    };
    let alpha = match v.get("l1_alpha") {
        Some(x) => f64::from_json(x, "$.l1_alpha")?,
        None => crate::sae::DEFAULT_ALPHA,
    };
    with_path(SaeModel::new(decoder, s, sigma, alpha), "$")
}

pub fn parse_sae_model_json(text: &str) -> Result<SaeModel> {
    sae_model_from_value(&parse_json(text)?)
}

pub fn sae_model_to_value(m: &SaeModel) -> Value {
    json!({
        "decoder": m.decoder().to_rows(),
        "s": m.s(),
        "noise_sigma": m.noise_sigma(),
        "l1_alpha": m.l1_alpha(),
    })
}

pub fn verdict_to_value<S: JsonScalar>(v: &BlackwellVerdict<S>) -> Value {
    let witness = |w: Option<&TransitionWitness<S>>| w.map_or(Value::Null, |w| kernel_to_value(&w.kernel));
    json!({
        "relation": v.relation.kind(),
        "feature_equivalent": v.feature_equivalent,
        "heuristic": v.heuristic,
        "forward_witness": witness(v.relation.forward()),
        "backward_witness": witness(v.relation.backward()),
    })
}

pub fn certificate_to_value(c: &IdentifiabilityCertificate, labels: &[String]) -> Value {
    let maps = |set: &std::collections::BTreeSet<TransitionMap>| {
        set.iter().map(|t| transition_to_value(t, labels)).collect::<Vec<_>>()
    };
    json!({
        "class": c.class_description,
        "group": c.group.name(),
        "concept_transitions": maps(&c.concept_transitions),
        "kernel_transitions": maps(&c.kernel_transitions),
        "intersection": maps(&c.intersection),
        "verdict": c.verdict,
        "counterexample": c.counterexample.as_ref().map(|t| transition_to_value(t, labels)),
    })
}

pub fn matrix_to_value(m: &DMatrix<f64>) -> Value {
    json!(rows_of(m))
}

/// Pretty JSON with sorted keys and floats printed with 17 significant
/// digits, so equal values always serialize to identical bytes.
pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_canonical(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(v).expect("scalar JSON"))
        }
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                let _ = write!(out, "{n}");
            } else {
                let x = n.as_f64().expect("JSON number");
                let _ = write!(out, "{x:.16e}");
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_canonical(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_canonical(&map[*k], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}
