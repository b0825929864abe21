//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{distribution, injection, kernel, labels, oracle, rng};
use lcgm_core::blackwell::{
    blackwell_relation, find_coarsening_witness, is_feature_equivalent, unconstrained_coarsening,
    verify_coarsening, RelationKind, TransitionWitness,
};
use lcgm_core::dictionary::learn::{dictionary_recovery_experiment, RecoveryConfig};
use lcgm_core::dictionary::{
    best_scale_permutation, is_injective_on_sparse, sample_exact_sparsity, spark_bruteforce_exact,
    spark_report, Dictionary, Injectivity, MatchSolver, DEFAULT_RANK_TOL,
};
use lcgm_core::ica::{
    darmois_consequence_test, gaussian_rotation_invariance_check, ica_experiment, DarmoisConfig, IcaConfig,
    SourceKind,
};
use lcgm_core::kernel::{compose, posterior, pushforward};
use lcgm_core::numeric::ratio;
use lcgm_core::reference;
use lcgm_core::sae::{elbo_limit_objective, map_objective, posthoc_check, train_mod, SaeModel, TrainConfig};
use lcgm_core::transition::{certify_identifiability, GroupSpec, TransitionMap};
use lcgm_core::{FiniteDistribution, Lcgm, NumericMode, Rational, StochasticKernel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const EXACT: NumericMode = NumericMode::Exact;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Debug>(x: T) -> String {
    format!("{x:?}")
}

/// Fastest of `reps` timed runs of `f`.
fn best_of(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn r(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

// K(z|c) Q(c) summed by hand, as a check independent of `pushforward`.
fn push_by_hand(k: &StochasticKernel<Rational>, q: &FiniteDistribution<Rational>) -> Vec<Rational> {
    k.rows()
        .iter()
        .map(|row| row.iter().zip(q.probs()).fold(r(0, 1), |acc, (a, b)| acc + a.clone() * b.clone()))
        .collect()
}

fn criterion_1() -> (Check, Duration) {
    let run = || -> Check {
        let (m, m2) = reference::feature_equivalent_pair();
        let want = vec![r(1, 2), r(1, 2)];
        for model in [&m, &m2] {
            let p = pushforward(model.mixing(), model.concept_dist()).map_err(e)?;
            ensure(p.probs() == want.as_slice(), format!("pushforward {:?}", p.probs()))?;
            ensure(push_by_hand(model.mixing(), model.concept_dist()) == want, "hand pushforward")?;
        }
        let h = posterior(m.mixing(), m.concept_dist(), EXACT).map_err(e)?;
        let literal = vec![vec![r(1, 1), r(1, 2)], vec![r(0, 1), r(1, 2)]];
        ensure(h.rows() == literal.as_slice(), format!("posterior {:?}", h.rows()))?;
        ensure(h == reference::coarse_posterior(), "posterior differs from reference")?;
        // Bayes by hand: H(c|z) P(z) = K(z|c) Q(c)
        let (k, q) = (m.mixing(), m.concept_dist());
        for c in 0..2 {
            for z in 0..2 {
                ensure(
                    literal[c][z].clone() * want[z].clone() == k.entry(z, c).clone() * q.probs()[c].clone(),
                    "Bayes identity",
                )?;
            }
        }
        Ok("P = (1/2, 1/2) for both models, H = [[1, 1/2], [0, 1/2]]".into())
    };
    let res = run();
    let (m, _) = reference::feature_equivalent_pair();
    let t = best_of(20, || {
        let _ = pushforward(m.mixing(), m.concept_dist()).unwrap();
        let _ = posterior(m.mixing(), m.concept_dist(), EXACT).unwrap();
    });
    (res, t)
}

fn criterion_2() -> (Check, Duration) {
    let (m, m2) = reference::feature_equivalent_pair();
    let run = || -> Check {
        let w = find_coarsening_witness(&m, &m2).map_err(e)?.ok_or("no witness found")?;
        ensure(verify_coarsening(&m, &m2, &w, EXACT).map_err(e)?, "found witness fails")?;
        let printed = reference::coarsening_witness();
        ensure(verify_coarsening(&m, &m2, &printed, EXACT).map_err(e)?, "printed witness fails")?;
        // independent check of TQ = Q' and K = K'T for the printed witness
        let t = &printed.kernel;
        ensure(push_by_hand(t, m.concept_dist()) == m2.concept_dist().probs(), "TQ != Q'")?;
        for z in 0..2 {
            for c in 0..2 {
                let kt = (0..2).fold(r(0, 1), |acc, j| acc + m2.mixing().entry(z, j).clone() * t.entry(j, c).clone());
                ensure(kt == *m.mixing().entry(z, c), "K != K'T")?;
            }
        }
        let rows: Vec<Vec<String>> = w.kernel.rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
        Ok(format!("found T = {rows:?}; printed T verifies"))
    };
    let res = run();
    let t = best_of(20, || {
        let w = find_coarsening_witness(&m, &m2).unwrap().unwrap();
        assert!(verify_coarsening(&m, &m2, &w, EXACT).unwrap());
    });
    (res, t)
}

fn criterion_3() -> (Check, Duration) {
    let (m, m2) = reference::incomparable_pair();
    let run = || -> Check {
        for (a, b) in [(&m, &m2), (&m2, &m)] {
            let v = blackwell_relation(a, b).map_err(e)?;
            ensure(v.relation.kind() == RelationKind::Incomparable, format!("{:?}", v.relation.kind()))?;
            ensure(v.feature_equivalent, "not feature equivalent")?;
        }
        let (fwd, fu) = unconstrained_coarsening(&m, &m2).map_err(e)?.ok_or("no forward solution")?;
        let (bwd, bu) = unconstrained_coarsening(&m2, &m).map_err(e)?.ok_or("no backward solution")?;
        ensure(fu && bu, "solutions not unique")?;
        let lit_f = vec![vec![r(5, 6), r(-1, 2)], vec![r(1, 6), r(3, 2)]];
        let lit_b = vec![vec![r(9, 8), r(3, 8)], vec![r(-1, 8), r(5, 8)]];
        ensure(fwd == lit_f, format!("forward {fwd:?}"))?;
        ensure(bwd == lit_b, format!("backward {bwd:?}"))?;
        ensure((fwd, bwd) == reference::incomparable_unconstrained_solutions(), "reference mismatch")?;
        Ok("incomparable in both orders, feature-equivalent; unique solutions have negative entries".into())
    };
    let res = run();
    let t = best_of(20, || {
        let v = blackwell_relation(&m, &m2).unwrap();
        assert!(v.feature_equivalent);
    });
    (res, t)
}

/// `M = (Q, E_g)` and `M' = (τQ, E_{g∘τ⁻¹})`.
fn dirac_pair(seed: u64) -> (Lcgm<Rational>, Lcgm<Rational>) {
    let mut rg = rng(seed);
    let n = rg.random_range(1..=5);
    let f = n + rg.random_range(0..=3);
    let (lc, lf) = (labels("c", n), labels("z", f));
    let full = rg.random_bool(0.7);
    let q = distribution(&mut rg, &lc, full);
    let g = injection(&mut rg, n, f);
    let tau = injection(&mut rg, n, n);
    let mut inv = vec![0; n];
    for (i, &t) in tau.iter().enumerate() {
        inv[t] = i;
    }
    let moved: Vec<Rational> = (0..n).map(|j| q.probs()[inv[j]].clone()).collect();
    let lc2 = labels("d", n);
    let k = StochasticKernel::dirac(lc.clone(), lf.clone(), |c| g[c]).unwrap();
    let k2 = StochasticKernel::dirac(lc2.clone(), lf, |j| g[inv[j]]).unwrap();
    (
        Lcgm::new(q, k).unwrap(),
        Lcgm::new(FiniteDistribution::new(lc2, moved).unwrap(), k2).unwrap(),
    )
}

fn criterion_4() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        for seed in 0..500u64 {
            let (m, m2) = dirac_pair(seed);
            ensure(is_feature_equivalent(&m, &m2, EXACT).map_err(e)?, format!("case {seed} not feature equivalent"))?;
            let v = blackwell_relation(&m, &m2).map_err(e)?;
            ensure(
                v.relation.kind() == RelationKind::Equivalent,
                format!("case {seed}: {:?}", v.relation.kind()),
            )?;
        }
        Ok("500/500 Dirac feature-equivalent pairs are Blackwell equivalent".into())
    };
    let res = run();
    (res, t.elapsed())
}

fn criterion_5() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        for d in 2..=4 {
            let class = reference::mixture_class(d, 3, d as u64);
            let certify = |group: &GroupSpec| {
                certify_identifiability(&class.concepts, &class.kernels, group, d, &class.base, EXACT)
            };
            let yes = certify(&GroupSpec::Permutations).map_err(e)?;
            ensure(yes.verdict && yes.is_sound(), format!("d = {d}: permutations not certified"))?;
            ensure(yes.intersection.len() == TransitionMap::all(d).len(), "intersection is not all of S_d")?;
            let no = certify(&GroupSpec::Identity).map_err(e)?;
            let cx = no.counterexample.clone().ok_or(format!("d = {d}: no counterexample"))?;
            ensure(!no.verdict && no.is_sound() && !cx.is_identity(), format!("d = {d}: identity verdict"))?;
        }
        Ok("d = 2, 3, 4: identifiable up to permutations, not up to identity".into())
    };
    let res = run();
    (res, t.elapsed())
}

fn criterion_6() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        let mut rg = rng(606);
        let (mut not_injective, mut confirmed) = (0, 0);
        for i in 0..200 {
            let d = rg.random_range(2..=12);
            let p = rg.random_range(2..=10);
            let integer = i % 2 == 1;
            let g = if integer {
                let mut m = DMatrix::from_fn(p, d, |_, _| rg.random_range(-1i64..=1) as f64);
                for j in 0..d {
                    if m.column(j).iter().all(|&x| x == 0.0) {
                        m[(rg.random_range(0..p), j)] = 1.0;
                    }
                }
                Dictionary::new(m).map_err(e)?
            } else {
                Dictionary::random_gaussian(p, d, &mut rg)
            };
            let rep = spark_report(&g, Some(d), DEFAULT_RANK_TOL).map_err(e)?;
            let spark = rep.exact_spark.ok_or(format!("matrix {i}: no exact spark"))?;
            ensure(spark >= rep.lower_bound, format!("matrix {i}: spark {spark} < bound {}", rep.lower_bound))?;
            if integer {
                let rows: Vec<Vec<Rational>> = (0..p)
                    .map(|a| (0..d).map(|b| r(g.matrix()[(a, b)] as i64, 1)).collect())
                    .collect();
                let exact = spark_bruteforce_exact(&rows, d).unwrap_or(d + 1);
                ensure(exact == spark, format!("matrix {i}: float spark {spark}, exact {exact}"))?;
            }
            let ss: Vec<usize> = (1..=d.div_ceil(2)).collect();
            for &s in &ss {
                let probes = 10_000 / ss.len();
                let hits = oracle::collisions(&g, s, probes, &mut rg);
                match is_injective_on_sparse(&rep, s) {
                    Injectivity::Injective => ensure(hits == 0, format!("matrix {i}, s = {s}: {hits} collisions"))?,
                    Injectivity::NotInjective => {
                        not_injective += 1;
                        confirmed += usize::from(hits > 0);
                    }
                    Injectivity::Unknown => return Err(format!("matrix {i}, s = {s}: undecided")),
                }
            }
        }
        let mut dup = Dictionary::random_gaussian(5, 6, &mut rg).into_matrix();
        let c0 = dup.column(0).clone_owned();
        dup.set_column(3, &c0);
        let rep = spark_report(&Dictionary::new(dup).map_err(e)?, None, DEFAULT_RANK_TOL).map_err(e)?;
        ensure(rep.exact_spark == Some(2), format!("duplicated columns: {:?}", rep.exact_spark))?;
        Ok(format!(
            "200 matrices, spark >= bound, 0 violations; {confirmed}/{not_injective} non-injective verdicts hit by probes"
        ))
    };
    let res = run();
    (res, t.elapsed())
}

fn criterion_7() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        let mut ok = 0;
        let mut corr = Vec::new();
        for seed in 0..5 {
            let rep = dictionary_recovery_experiment(&RecoveryConfig::new(12, 8, 2, 2000, seed)).map_err(e)?;
            ok += usize::from(rep.recovered && rep.min_abs_correlation >= 0.99);
            corr.push(format!("{:.4}", rep.min_abs_correlation));
        }
        ensure(ok >= 4, format!("{ok}/5 recovered, min correlations {corr:?}"))?;
        Ok(format!("{ok}/5 recovered, min correlations {corr:?}"))
    };
    let res = run();
    (res, t.elapsed())
}

fn criterion_8() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        let mut msg = Vec::new();
        for d in [2, 3] {
            let mut ok = 0;
            for seed in 0..10 {
                let rep = ica_experiment(&IcaConfig::new(vec![SourceKind::Uniform; d], 20_000, seed)).map_err(e)?;
                ok += usize::from(rep.aligned);
            }
            ensure(ok >= 9, format!("d = {d}: {ok}/10 aligned"))?;
            msg.push(format!("d = {d}: {ok}/10 aligned"));
            let inv = gaussian_rotation_invariance_check(d, 11, 50_000, None).map_err(e)?;
            ensure(
                inv.cov_frobenius_error < 0.05 && inv.orthogonality_error <= 1e-10,
                format!("d = {d}: invariance error {}", inv.cov_frobenius_error),
            )?;
        }
        // a 45 degree rotation mixes both coordinates fully
        let rot = lcgm_core::ica::rotation_2d(std::f64::consts::FRAC_PI_4);
        let cfg = DarmoisConfig::default();
        let uni = darmois_consequence_test(&rot, &[SourceKind::Uniform; 2], 20_000, 5, &cfg).map_err(e)?;
        ensure(uni.independence_rejected, format!("uniform not rejected, p = {}", uni.p_value))?;
        let gau = darmois_consequence_test(&rot, &[SourceKind::Gaussian; 2], 20_000, 5, &cfg).map_err(e)?;
        ensure(!gau.independence_rejected, format!("Gaussian rejected, p = {}", gau.p_value))?;
        msg.push(format!("uniform p = {:.4}, Gaussian p = {:.4}", uni.p_value, gau.p_value));
        Ok(msg.join("; "))
    };
    let res = run();
    (res, t.elapsed())
}

fn criterion_9() -> (Check, Duration) {
    let t = Instant::now();
    let run = || -> Check {
        let (d, p, s, n) = (12, 8, 2, 2000);
        let mut ok = 0;
        let mut errs = Vec::new();
        for seed in 0..5u64 {
            let mut rg = rng(900 + seed);
            let truth = Dictionary::random_gaussian(p, d, &mut rg);
            let codes = sample_exact_sparsity(d, s, n, &mut rg);
            let mut data = DMatrix::zeros(n, p);
            for (i, c) in codes.iter().enumerate() {
                data.set_row(i, &truth.apply(c).map_err(e)?.transpose());
            }
            let run = train_mod(&data, d, s, &TrainConfig { seed, ..TrainConfig::default() }).map_err(e)?;
            ensure(
                run.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-6),
                format!("seed {seed}: loss increased"),
            )?;
            let w = best_scale_permutation(&truth, run.model.decoder(), MatchSolver::Assignment).map_err(e)?;
            let err = w.max_relative_error(&truth, run.model.decoder());
            ok += usize::from(err <= 0.05);
            errs.push(format!("{err:.2e}"));
            let post = posthoc_check(&run.model).map_err(e)?;
            ensure(post.passes_2s == Injectivity::Injective, format!("seed {seed}: posthoc {:?}", post.passes_2s))?;
        }
        ensure(ok >= 4, format!("{ok}/5 recovered, errors {errs:?}"))?;
        Ok(format!("{ok}/5 recovered, errors {errs:?}; losses monotone; posthoc injective"))
    };
    let res = run();
    (res, t.elapsed())
}

fn invariant_suites() -> Check {
    for seed in 0..200u64 {
        let mut rg = rng(10_000 + seed);
        let (a, b, c) = (rg.random_range(1..5), rg.random_range(1..5), rg.random_range(1..5));
        let (la, lb, lc) = (labels("a", a), labels("b", b), labels("c", c));
        let k = kernel(&mut rg, &la, &lb);
        let l = kernel(&mut rg, &lb, &lc);
        let q = distribution(&mut rg, &la, false);
        let lhs = pushforward(&compose(&l, &k).map_err(e)?, &q).map_err(e)?;
        let rhs = pushforward(&l, &pushforward(&k, &q).map_err(e)?).map_err(e)?;
        ensure(lhs == rhs, format!("functoriality, case {seed}"))?;

        let qf = distribution(&mut rg, &la, true);
        let pz = pushforward(&k, &qf).map_err(e)?;
        let h = posterior(&k, &qf, EXACT).map_err(e)?;
        for ci in 0..a {
            for z in 0..b {
                ensure(
                    h.entry(ci, z).clone() * pz.probs()[z].clone() == k.entry(z, ci).clone() * qf.probs()[ci].clone(),
                    format!("Bayes consistency, case {seed}"),
                )?;
            }
        }

        // chain M ⪯ M' ⪯ M'' planted through T1 then T2
        let lf = labels("z", rg.random_range(1..4));
        let t1 = kernel(&mut rg, &la, &lb);
        let t2 = kernel(&mut rg, &lb, &lc);
        let k3 = kernel(&mut rg, &lc, &lf);
        let k2 = compose(&k3, &t2).map_err(e)?;
        let m = Lcgm::new(q.clone(), compose(&k2, &t1).map_err(e)?).map_err(e)?;
        let q2 = pushforward(&t1, &q).map_err(e)?;
        let m2 = Lcgm::new(q2.clone(), k2).map_err(e)?;
        let m3 = Lcgm::new(pushforward(&t2, &q2).map_err(e)?, k3).map_err(e)?;
        let w1 = TransitionWitness { kernel: t1 };
        let w2 = TransitionWitness { kernel: t2.clone() };
        ensure(verify_coarsening(&m, &m2, &w1, EXACT).map_err(e)?, format!("planted witness, case {seed}"))?;
        ensure(is_feature_equivalent(&m, &m2, EXACT).map_err(e)?, format!("coarsening without equivalence, case {seed}"))?;
        ensure(verify_coarsening(&m2, &m3, &w2, EXACT).map_err(e)?, format!("second link, case {seed}"))?;
        let w13 = TransitionWitness { kernel: compose(&t2, &w1.kernel).map_err(e)? };
        ensure(verify_coarsening(&m, &m3, &w13, EXACT).map_err(e)?, format!("transitivity, case {seed}"))?;

        let (p, d) = (rg.random_range(1..6), rg.random_range(1..6));
        let (sigma, alpha) = (rg.random_range(0.1..3.0), rg.random_range(0.0..2.0));
        let s = rg.random_range(1..=d);
        let model = SaeModel::new(Dictionary::random_gaussian(p, d, &mut rg), s, sigma, alpha).map_err(e)?;
        let z = DVector::from_fn(p, |_, _| rg.random_range(-2.0..2.0));
        let code = sample_exact_sparsity(d, s, 1, &mut rg).remove(0);
        let lhs = map_objective(&model, &z, &code).map_err(e)?;
        let rhs = elbo_limit_objective(&model, &z, &code).map_err(e)? + alpha * code.l1_norm();
        ensure((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), format!("objective decomposition, case {seed}"))?;
    }
    Ok("200 cases each".into())
}

fn cli_determinism() -> Check {
    let runs: [&[&str]; 3] = [
        &["paper-examples"],
        &["dict-recover", "--d", "6", "--p", "4", "--s", "1", "--n", "300", "--epochs", "30", "--seed", "9"],
        &["ica-demo", "--n", "4000", "--seed", "4", "--invariance"],
    ];
    for args in runs {
        let outs: Vec<Vec<u8>> = [None, Some("1"), Some("3")]
            .into_iter()
            .map(|threads| {
                let mut cmd = Command::new(env!("CARGO_BIN_EXE_lcgm-kit"));
                match threads {
                    Some(n) => cmd.env("LCGM_THREADS", n),
                    None => cmd.env_remove("LCGM_THREADS"),
                };
                cmd.args(args).output().map(|o| o.stdout).map_err(e)
            })
            .collect::<Result<_, _>>()?;
        ensure(!outs[0].is_empty(), format!("{args:?}: empty report"))?;
        ensure(outs.iter().all(|o| *o == outs[0]), format!("{args:?}: reports differ"))?;
    }
    Ok("reports byte-identical across runs and thread counts".into())
}

fn criterion_10() -> (Check, Duration) {
    let t = Instant::now();
    let res = invariant_suites().and_then(|a| cli_determinism().map(|b| format!("{a}; {b}")));
    (res, t.elapsed())
}

fn main() -> ExitCode {
    type Crit = (&'static str, Duration, fn() -> (Check, Duration));
    let criteria: [Crit; 10] = [
        ("feature-equivalent pair pushforward and posterior", Duration::from_millis(1), criterion_1),
        ("coarsening witness found and verified", Duration::from_millis(10), criterion_2),
        ("incomparable pair with unique unconstrained solutions", Duration::from_millis(10), criterion_3),
        ("Dirac feature equivalence implies Blackwell equivalence", Duration::from_secs(5), criterion_4),
        ("finite mixture class certificates", Duration::from_secs(5), criterion_5),
        ("spark bound and sparse injectivity", Duration::from_secs(60), criterion_6),
        ("planted dictionary recovery", Duration::from_secs(120), criterion_7),
        ("linear ICA recovery and Gaussian checks", Duration::from_secs(120), criterion_8),
        ("sparse autoencoder training and post-hoc check", Duration::from_secs(120), criterion_9),
        ("invariant suites and report determinism", Duration::from_secs(60), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let (res, took) = f();
        let (ok, detail) = match res {
            Ok(d) if took < *limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {}: {name} ({:.3?}, limit {:?}): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took,
            limit
        );
    }
    println!("{}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
