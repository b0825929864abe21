use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::{json, Value};

use lcgm_core::blackwell::{blackwell_relation, blackwell_relation_float};
use lcgm_core::dictionary::learn::{dictionary_recovery_experiment, RecoveryConfig};
use lcgm_core::dictionary::{is_injective_on_sparse, spark_report, Dictionary, Injectivity};
use lcgm_core::fixtures::{parse_fixture, run_fixture, FixtureOutcome};
use lcgm_core::ica::{
    darmois_consequence_test, gaussian_rotation_invariance_check, ica_experiment,
    DarmoisConfig, IcaConfig, SourceKind,
};
use lcgm_core::io::{
    certificate_to_value, dictionary_to_value, matrix_to_value, mixture_to_value,
    parse_class_spec, parse_lcgm, parse_matrix_json, parse_matrix_csv, parse_mixture_json,
    sae_model_to_value, to_canonical_json, verdict_to_value, ClassSpec, JsonScalar,
    MAX_INPUT_BYTES,
};
use lcgm_core::mixture::{best_permutation, em_fit, EmConfig, EmInit};
use lcgm_core::sae::{posthoc_check, seed_stability_study, train_mod, TrainConfig};
use lcgm_core::transition::certify_identifiability;
use lcgm_core::{NumericMode, Rational};

use crate::report::{Inputs, Report};
use crate::{CliError, Outcome};

/// Bundled fixtures, in name order.
const BUNDLED_FIXTURES: &[(&str, &str)] = &[
    ("coarsening_reverse.json", include_str!("../fixtures/examples/coarsening_reverse.json")),
    ("coarsening_witness.json", include_str!("../fixtures/examples/coarsening_witness.json")),
    (
        "feature_equivalent_pair_other_pushforward.json",
        include_str!("../fixtures/examples/feature_equivalent_pair_other_pushforward.json"),
    ),
    (
        "feature_equivalent_pair_pushforward.json",
        include_str!("../fixtures/examples/feature_equivalent_pair_pushforward.json"),
    ),
    (
        "feature_equivalent_pair_relation.json",
        include_str!("../fixtures/examples/feature_equivalent_pair_relation.json"),
    ),
    (
        "incomparable_pair_relation.json",
        include_str!("../fixtures/examples/incomparable_pair_relation.json"),
    ),
    (
        "mixture_class_d2_permutations.json",
        include_str!("../fixtures/examples/mixture_class_d2_permutations.json"),
    ),
    (
        "mixture_class_d3_identity.json",
        include_str!("../fixtures/examples/mixture_class_d3_identity.json"),
    ),
    (
        "mixture_class_d3_permutations.json",
        include_str!("../fixtures/examples/mixture_class_d3_permutations.json"),
    ),
    (
        "mixture_class_d4_permutations.json",
        include_str!("../fixtures/examples/mixture_class_d4_permutations.json"),
    ),
];

fn read(path: &Path) -> Result<String, CliError> {
    let meta = std::fs::metadata(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if meta.len() > MAX_INPUT_BYTES as u64 {
        return Err(CliError::Input(format!("{}: file too large", path.display())));
    }
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: lcgm_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_mode(s: &str) -> Result<NumericMode, CliError> {
    if s == "exact" {
        return Ok(NumericMode::Exact);
    }
    let tol = s
        .strip_prefix("float:")
        .and_then(|t| t.parse::<f64>().ok())
        .ok_or_else(|| CliError::Input(format!("--mode must be `exact` or `float:TOL`, got `{s}`")))?;
    Ok(NumericMode::float(tol)?)
}

fn outcome(command: &str, inputs: Inputs, body: Value, warnings: Vec<String>, negative: bool) -> Outcome {
    Outcome {
        report: Report {
            command: command.into(),
            inputs_digest: inputs.digest(),
            body,
            warnings,
        },
        negative,
    }
}

fn mode_name(mode: NumericMode) -> String {
    match mode {
        NumericMode::Exact => "exact".into(),
        NumericMode::Float(t) => format!("float:{t:e}"),
    }
}

pub fn blackwell(a: &Path, b: &Path, mode: &str) -> Result<Outcome, CliError> {
    let mode = parse_mode(mode)?;
    let (ta, tb) = (read(a)?, read(b)?);
    let mut inputs = Inputs::new("blackwell");
    inputs.add("model_a", ta.as_bytes());
    inputs.add("model_b", tb.as_bytes());
    inputs.add_params(&json!({ "mode": mode_name(mode) }));
    let mut warnings = Vec::new();
    let verdict = match mode {
        NumericMode::Exact => {
            let ma = in_file(a, parse_lcgm::<Rational>(&ta, mode))?;
            let mb = in_file(b, parse_lcgm::<Rational>(&tb, mode))?;
            verdict_to_value(&blackwell_relation(&ma, &mb)?)
        }
        NumericMode::Float(tol) => {
            let ma = in_file(a, parse_lcgm::<f64>(&ta, mode))?;
            let mb = in_file(b, parse_lcgm::<f64>(&tb, mode))?;
            warnings.push("float inputs were rounded to rationals; the verdict is heuristic".into());
            verdict_to_value(&blackwell_relation_float(&ma, &mb, tol)?)
        }
    };
    Ok(outcome("blackwell", inputs, json!({ "mode": mode_name(mode), "verdict": verdict }), warnings, false))
}

fn certify_with<S: JsonScalar>(spec: ClassSpec<S>, mode: NumericMode) -> Result<(Value, bool), CliError> {
    let cert = certify_identifiability(
        &spec.concepts,
        &spec.kernels,
        &spec.group,
        spec.labels().len(),
        &spec.base,
        mode,
    )?;
    if !cert.is_sound() {
        return Err(CliError::Internal("certificate failed its self-check".into()));
    }
    Ok((certificate_to_value(&cert, spec.labels()), cert.verdict))
}

pub fn certify(path: &Path, mode: &str) -> Result<Outcome, CliError> {
    let mode = parse_mode(mode)?;
    let text = read(path)?;
    let mut inputs = Inputs::new("certify");
    inputs.add("class", text.as_bytes());
    inputs.add_params(&json!({ "mode": mode_name(mode) }));
    let (cert, verdict) = match mode {
        NumericMode::Exact => certify_with(in_file(path, parse_class_spec::<Rational>(&text, mode))?, mode)?,
        NumericMode::Float(_) => certify_with(in_file(path, parse_class_spec::<f64>(&text, mode))?, mode)?,
    };
    Ok(outcome("certify", inputs, json!({ "mode": mode_name(mode), "certificate": cert }), vec![], !verdict))
}

fn read_matrix(path: &Path, inputs: &mut Inputs, name: &str) -> Result<DMatrix<f64>, CliError> {
    let text = read(path)?;
    inputs.add(name, text.as_bytes());
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        in_file(path, parse_matrix_csv(&text))
    } else {
        in_file(path, parse_matrix_json(&text))
    }
}

fn injectivity_name(i: Injectivity) -> &'static str {
    match i {
        Injectivity::Injective => "injective",
        Injectivity::NotInjective => "not_injective",
        Injectivity::Unknown => "unknown",
    }
}

pub fn spark(path: &Path, max_k: Option<usize>, rank_tol: f64, s: Option<usize>) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::new("spark");
    let m = read_matrix(path, &mut inputs, "matrix")?;
    inputs.add_params(&json!({ "max_k": max_k, "rank_tol": rank_tol, "s": s }));
    let g = in_file(path, Dictionary::new(m))?;
    let report = spark_report(&g, max_k, rank_tol)?;
    let summary = match report.exact_spark {
        Some(k) if k <= report.d => format!("spark = {k}"),
        _ => format!("spark > {}", report.independent_up_to),
    };
    let mut body = json!({
        "p": g.p(),
        "d": report.d,
        "summary": summary,
        "exact_spark": report.exact_spark,
        "independent_up_to": report.independent_up_to,
        "incoherence": report.incoherence,
        "incoherence_lower_bound": report.lower_bound,
        "certified_lower_bound": report.certified_lower_bound(),
        "injective_on_s": report.injective_on_s.iter()
            .map(|(k, v)| (k.to_string(), json!(injectivity_name(*v))))
            .collect::<serde_json::Map<_, _>>(),
    });
    let mut negative = false;
    if let Some(s) = s {
        let v = is_injective_on_sparse(&report, s);
        negative = v == Injectivity::NotInjective;
        body["query"] = json!({ "s": s, "injective": injectivity_name(v) });
    }
    Ok(outcome("spark", inputs, body, vec![], negative))
}

pub struct DictRecover {
    pub d: usize,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub epochs: usize,
    pub min_correlation: f64,
    pub seed: u64,
}

pub fn dict_recover(a: DictRecover) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::new("dict-recover");
    inputs.add_params(&json!({
        "d": a.d, "p": a.p, "s": a.s, "n": a.n, "epochs": a.epochs,
        "min_correlation": a.min_correlation, "seed": a.seed,
    }));
    let cfg = RecoveryConfig {
        epochs: a.epochs,
        min_correlation: a.min_correlation,
        ..RecoveryConfig::new(a.d, a.p, a.s, a.n, a.seed)
    };
    let r = dictionary_recovery_experiment(&cfg)?;
    let mut warnings = Vec::new();
    if r.insufficient_data {
        warnings.push("too few samples for the planted dimensions; recovery was not attempted".into());
    }
    if r.degenerate {
        warnings.push("training data is degenerate".into());
    }
    let mut body = serde_json::to_value(&r).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(g) = &r.learned {
        body["learned_dictionary"] = dictionary_to_value(g);
    }
    Ok(outcome("dict-recover", inputs, body, warnings, !r.recovered))
}

pub struct IcaDemo {
    pub d: usize,
    pub sources: Option<Vec<String>>,
    pub n: usize,
    pub tol: f64,
    pub invariance: bool,
    pub darmois: bool,
    pub seed: u64,
}

fn kind_name(k: SourceKind) -> &'static str {
    match k {
        SourceKind::Uniform => "uniform",
        SourceKind::Laplace => "laplace",
        SourceKind::Gaussian => "gaussian",
    }
}

/// Orthonormal DCT-II matrix: every output coordinate mixes every source.
fn dct_rotation(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |k, j| {
        let scale = if k == 0 { (1.0 / d as f64).sqrt() } else { (2.0 / d as f64).sqrt() };
        scale * (std::f64::consts::PI * (j as f64 + 0.5) * k as f64 / d as f64).cos()
    })
}

pub fn ica_demo(a: IcaDemo) -> Result<Outcome, CliError> {
    let sources: Vec<SourceKind> = match &a.sources {
        Some(list) => list.iter().map(|s| s.parse()).collect::<lcgm_core::Result<_>>()?,
        None => vec![SourceKind::Uniform; a.d],
    };
    if sources.len() != a.d {
        return Err(CliError::Input(format!(
            "--d {} but {} source kinds were given",
            a.d,
            sources.len()
        )));
    }
    let names: Vec<&str> = sources.iter().map(|&k| kind_name(k)).collect();
    let mut inputs = Inputs::new("ica-demo");
    inputs.add_params(&json!({
        "d": a.d, "sources": names, "n": a.n, "tol": a.tol,
        "invariance": a.invariance, "darmois": a.darmois, "seed": a.seed,
    }));
    let cfg = IcaConfig {
        tol: a.tol,
        ..IcaConfig::new(sources.clone(), a.n, a.seed)
    };
    let r = ica_experiment(&cfg)?;
    let mut warnings = Vec::new();
    let gaussians = sources.iter().filter(|&&k| k == SourceKind::Gaussian).count();
    if gaussians > 1 {
        warnings.push(format!(
            "{gaussians} Gaussian sources: their mixing is only determined up to rotation"
        ));
    }
    let mut body = json!({
        "d": r.d,
        "p": r.p,
        "n": r.n,
        "seed": r.seed,
        "sources": names,
        "condition_number": r.condition_number,
        "true_mixing": matrix_to_value(&r.true_mixing),
        "mixing_estimate": matrix_to_value(&r.result.mixing_estimate),
        "unmixing": matrix_to_value(&r.result.unmixing),
        "rotation_orthogonality_error": r.result.rotation_orthogonality_error,
        "alignment": {
            "permutation": r.best_alignment.permutation,
            "signs": r.best_alignment.signs,
            "max_error": r.best_alignment.max_error,
            "tol": a.tol,
        },
        "aligned": r.aligned,
    });
    if a.invariance {
        let inv = gaussian_rotation_invariance_check(a.d, a.seed, 50_000, None)?;
        body["gaussian_invariance"] = json!({
            "n": inv.n,
            "tau": matrix_to_value(&inv.tau),
            "orthogonality_error": inv.orthogonality_error,
            "max_mean_z": inv.max_mean_z,
            "max_cov_z": inv.max_cov_z,
            "cov_frobenius_error": inv.cov_frobenius_error,
            "moments_within_bands": inv.moments_within_bands,
            "passed": inv.passed,
        });
    }
    if a.darmois {
        let t = dct_rotation(a.d);
        let rep = darmois_consequence_test(&t, &sources, a.n, a.seed, &DarmoisConfig::default())?;
        body["darmois"] = serde_json::to_value(&rep).map_err(|e| CliError::Internal(e.to_string()))?;
        body["darmois"]["t"] = matrix_to_value(&t);
    }
    Ok(outcome("ica-demo", inputs, body, warnings, !r.aligned))
}

pub struct MixtureFit {
    pub k: usize,
    pub data: PathBuf,
    pub planted: Option<PathBuf>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

pub fn mixture_fit(a: MixtureFit) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::new("mixture-fit");
    let data = read_matrix(&a.data, &mut inputs, "data")?;
    let planted = match &a.planted {
        Some(p) => {
            let text = read(p)?;
            inputs.add("planted", text.as_bytes());
            Some(in_file(p, parse_mixture_json(&text))?)
        }
        None => None,
    };
    inputs.add_params(&json!({ "k": a.k, "tol": a.tol, "max_iters": a.max_iters, "seed": a.seed }));
    let fit = em_fit(
        &data,
        a.k,
        &EmInit::KMeansPlusPlus(a.seed),
        &EmConfig {
            max_iters: a.max_iters,
            ..EmConfig::default()
        },
    )?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("EM stopped after {} iterations without converging", fit.ll_trace.len()));
    }
    if fit.degenerate {
        warnings.push(format!(
            "a covariance hit the eigenvalue floor or a component was reseeded ({} reseeds)",
            fit.reinitialized
        ));
    }
    let mut body = json!({
        "n": data.nrows(),
        "p": data.ncols(),
        "k": a.k,
        "model": mixture_to_value(&fit.model),
        "iterations": fit.ll_trace.len(),
        "mean_log_likelihood": fit.ll_trace.last().copied(),
        "converged": fit.converged,
        "degenerate": fit.degenerate,
        "reinitialized": fit.reinitialized,
    });
    let mut negative = false;
    if let Some(planted) = planted {
        let m = in_file(a.planted.as_deref().unwrap_or(Path::new("")), best_permutation(&planted, &fit.model))?;
        let matched = m.max_distance <= a.tol;
        negative = !matched;
        body["planted_match"] = json!({
            "permutation": m.permutation,
            "max_distance": m.max_distance,
            "tol": a.tol,
            "matched": matched,
        });
    }
    Ok(outcome("mixture-fit", inputs, body, warnings, negative))
}

pub struct SaeTrain {
    pub data: PathBuf,
    pub d: usize,
    pub s: usize,
    pub epochs: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub stability_seeds: Option<Vec<u64>>,
    pub stability_tol: f64,
    pub save_model: Option<PathBuf>,
    pub seed: u64,
}

pub fn sae_train(a: SaeTrain) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::new("sae-train");
    let data = read_matrix(&a.data, &mut inputs, "data")?;
    inputs.add_params(&json!({
        "d": a.d, "s": a.s, "epochs": a.epochs, "sigma": a.sigma, "alpha": a.alpha,
        "stability_seeds": a.stability_seeds, "stability_tol": a.stability_tol, "seed": a.seed,
    }));
    if !(a.sigma.is_finite() && a.sigma > 0.0) {
        return Err(CliError::Input("--sigma must be positive".into()));
    }
    let run = train_mod(
        &data,
        a.d,
        a.s,
        &TrainConfig {
            epochs: a.epochs,
            seed: a.seed,
            noise_sigma: a.sigma,
            l1_alpha: a.alpha,
        },
    )?;
    let post = posthoc_check(&run.model)?;
    let mut warnings = Vec::new();
    if run.degenerate {
        warnings.push("training data is degenerate".into());
    }
    if run.ridge_used {
        warnings.push("a ridge term was needed in the least-squares update".into());
    }
    if post.passes_2s == Injectivity::Unknown {
        warnings.push("spark bounds are inconclusive at this sparsity".into());
    }
    let trace = &run.loss_trace;
    let monotone = trace.windows(2).all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0));
    let mut body = json!({
        "n": data.nrows(),
        "p": data.ncols(),
        "model": sae_model_to_value(&run.model),
        "loss_trace": trace,
        "final_loss": trace.last().copied(),
        "loss_monotone": monotone,
        "posthoc": {
            "s": post.s,
            "incoherence": post.incoherence,
            "spark_lower_bound": post.spark_lower_bound,
            "certified_lower_bound": post.certified_lower_bound,
            "exact_spark": post.exact_spark,
            "passes_2s": injectivity_name(post.passes_2s),
            "conclusion": post.conclusion_text,
        },
    });
    if let Some(seeds) = &a.stability_seeds {
        let st = seed_stability_study(&data, a.d, a.s, seeds, a.epochs, a.stability_tol)?;
        if st.ambiguity_flagged {
            warnings.push("decoders from different seeds disagree beyond scale and permutation".into());
        }
        body["stability"] = serde_json::to_value(&st).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    if let Some(path) = &a.save_model {
        std::fs::write(path, to_canonical_json(&sae_model_to_value(&run.model)))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(outcome("sae-train", inputs, body, warnings, post.passes_2s == Injectivity::NotInjective))
}

fn load_fixture_dir(dir: &Path) -> Result<Vec<(String, String)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Input(e.to_string()))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            files.push((name, read(&path)?));
        }
    }
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no *.json fixtures", dir.display())));
    }
    files.sort();
    Ok(files)
}

pub fn paper_examples(dir: Option<&Path>) -> Result<Outcome, CliError> {
    let files = match dir {
        Some(d) => load_fixture_dir(d)?,
        None => BUNDLED_FIXTURES.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
    };
    let mut inputs = Inputs::new("paper-examples");
    let mut results: Vec<Value> = Vec::new();
    for (file, text) in &files {
        inputs.add(file, text.as_bytes());
        let out = match parse_fixture(text) {
            Ok(f) => run_fixture(&f),
            Err(e) => FixtureOutcome {
                name: file.clone(),
                kind: "unparsed".into(),
                passed: false,
                failures: vec![e.to_string()],
            },
        };
        let mut v = serde_json::to_value(&out).map_err(|e| CliError::Internal(e.to_string()))?;
        v["file"] = json!(file);
        results.push(v);
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r["passed"] == json!(false))
        .map(|r| r["name"].as_str().unwrap_or("").to_string())
        .collect();
    let body = json!({
        "mode": "exact",
        "total": results.len(),
        "passed": results.len() - failed.len(),
        "failed": failed,
        "results": results,
    });
    Ok(outcome("paper-examples", inputs, body, vec![], !failed.is_empty()))
}
