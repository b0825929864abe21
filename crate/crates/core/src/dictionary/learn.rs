//! Method-of-optimal-directions dictionary learning: OMP coding alternated
//! with a closed-form least-squares dictionary update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    best_scale_permutation, matched_correlations, omp_with_norms, sample_exact_sparsity,
    Dictionary, MatchSolver, ScalePermWitness, SparseVector, SubsetCoder,
};
use crate::error::{LcgmError, Result};
use crate::rng::{prng, substream};

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ModConfig {
    pub epochs: usize,
    pub seed: u64,
    /// OMP stops adding atoms below this residual norm.
    pub residual_tol: f64,
    /// Training stops once the mean loss falls below this value.
    pub target_loss: f64,
    /// Exhaustive support search is used alongside OMP when there are at
    /// most this many supports of size `s`.
    pub exhaustive_supports: usize,
    /// Atoms whose absolute correlation with another atom exceeds this value
    /// are candidates for replacement.
    pub duplicate_correlation: f64,
    /// Independent initializations; the run with the lowest final loss wins.
    pub restarts: usize,
    /// A run stops when the loss improved by at most `stall_tol` (relative)
    /// over the last `stall_window` epochs.
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for ModConfig {
    fn default() -> Self {
        ModConfig {
            epochs: 100,
            seed: 0,
            residual_tol: 1e-10,
            target_loss: 1e-20,
            exhaustive_supports: 256,
            duplicate_correlation: 0.95,
            restarts: 16,
            stall_window: 20,
            stall_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModResult {
    pub dictionary: Dictionary,
    pub codes: Vec<SparseVector>,
    /// Mean `½‖z − Gc‖²` after initialization and after each epoch.
    pub loss_trace: Vec<f64>,
    pub degenerate: bool,
    pub ridge_used: bool,
}

impl ModResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace is never empty")
    }
}

fn residual_sq(g: &DMatrix<f64>, z: &DVector<f64>, c: &SparseVector) -> f64 {
    let mut r = z.clone();
    for &(j, v) in c.entries() {
        r.axpy(-v, &g.column(j), 1.0);
    }
    r.norm_squared()
}

fn mean_loss(g: &DMatrix<f64>, data: &[DVector<f64>], codes: &[SparseVector]) -> f64 {
    // summed in order so the result does not depend on the thread count
    let parts: Vec<f64> = data
        .par_iter()
        .zip(codes.par_iter())
        .map(|(z, c)| residual_sq(g, z, c))
        .collect();
    let total: f64 = parts.iter().sum();
    0.5 * total / data.len() as f64
}

fn initial_dictionary(data: &[DVector<f64>], d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let p = data[0].len();
    let nonzero: Vec<usize> = (0..data.len()).filter(|&i| data[i].norm() > 0.0).collect();
    let picks = rand::seq::index::sample(rng, nonzero.len(), d.min(nonzero.len())).into_vec();
    let mut g = DMatrix::zeros(p, d);
    for j in 0..d {
        let col = match picks.get(j) {
            Some(&k) => data[nonzero[k]].clone(),
            None => DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)),
        };
        g.set_column(j, &(col.normalize()));
    }
    g
}

/// OMP code per sample, replaced by the exhaustive best `s`-term code when
/// that is cheap enough and fits better.
fn encode_all(
    g: &Dictionary,
    data: &[DVector<f64>],
    s: usize,
    config: &ModConfig,
) -> Result<Vec<SparseVector>> {
    let norms = g.column_norms();
    let exhaustive = SubsetCoder::new(g, s, config.exhaustive_supports);
    data.par_iter()
        .map(|z| {
            let code = omp_with_norms(g, &norms, z, s, config.residual_tol)?.code;
            Ok(match &exhaustive {
                Some(coder) => {
                    let alt = coder.encode(z);
                    if residual_sq(g.matrix(), z, &alt) < residual_sq(g.matrix(), z, &code) {
                        alt
                    } else {
                        code
                    }
                }
                None => code,
            })
        })
        .collect()
}

/// Least-squares update of the atoms in `used`; `None` if the normal
/// equations needed no ridge and solved cleanly.
fn least_squares_update(
    g: &DMatrix<f64>,
    data: &[DVector<f64>],
    codes: &[SparseVector],
    used: &[usize],
) -> (DMatrix<f64>, bool) {
    let k = used.len();
    let p = g.nrows();
    let mut slot = vec![usize::MAX; g.ncols()];
    for (a, &j) in used.iter().enumerate() {
        slot[j] = a;
    }
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut cross = DMatrix::<f64>::zeros(p, k);
    for (z, c) in data.iter().zip(codes) {
        for &(i, vi) in c.entries() {
            cross.column_mut(slot[i]).axpy(vi, z, 1.0);
            for &(j, vj) in c.entries() {
                gram[(slot[i], slot[j])] += vi * vj;
            }
        }
    }
    let mut ridge = false;
    let chol = match gram.clone().cholesky() {
        Some(ch) if ch.l().diagonal().min() > 1e-10 * ch.l().diagonal().max() => ch,
        _ => {
            ridge = true;
            log::info!("code Gram matrix is rank deficient; using ridge {RIDGE}");
            let reg = &gram + DMatrix::identity(k, k) * RIDGE;
            match reg.cholesky() {
                Some(ch) => ch,
                None => return (g.clone(), true),
            }
        }
    };
    // G_used = cross · gram⁻¹, solved as gram · G_usedᵀ = crossᵀ
    let solved = chol.solve(&cross.transpose()).transpose();
    let mut out = g.clone();
    for (a, &j) in used.iter().enumerate() {
        out.set_column(j, &solved.column(a));
    }
    (out, ridge)
}

/// Trains a `p × d` dictionary on the rows of `data` (`n × p`) with codes of
/// sparsity at most `s`. The mean loss is nonincreasing: each epoch keeps the
/// better of the new and previous code per sample, the dictionary update is
/// accepted only if it does not increase the loss, renormalization rescales
/// codes to compensate, and unused atoms are replaced at no cost.
pub fn train_mod(data: &DMatrix<f64>, d: usize, s: usize, config: &ModConfig) -> Result<ModResult> {
    let (n, p) = data.shape();
    if d == 0 || p == 0 {
        return Err(LcgmError::InvalidArgument("d and p must be positive".into()));
    }
    if n < d {
        return Err(LcgmError::InvalidArgument(format!(
            "need at least d = {d} samples, got {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(LcgmError::InvalidArgument("data has non-finite entries".into()));
    }
    let samples: Vec<DVector<f64>> = data.row_iter().map(|r| r.transpose()).collect();
    let mut best: Option<ModResult> = None;
    for restart in 0..config.restarts.max(1) {
        let seed = if restart == 0 {
            config.seed
        } else {
            substream(config.seed, restart as u64).random()
        };
        let run = train_once(&samples, d, s, config, seed)?;
        let done = run.degenerate || run.final_loss() <= config.target_loss;
        if best.as_ref().is_none_or(|b| run.final_loss() < b.final_loss()) {
            best = Some(run);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one run"))
}

fn train_once(
    samples: &[DVector<f64>],
    d: usize,
    s: usize,
    config: &ModConfig,
    seed: u64,
) -> Result<ModResult> {
    let n = samples.len();
    let mut rng = prng(seed);
    let mut g = initial_dictionary(samples, d, &mut rng);

    let degenerate = s == 0 || samples.iter().all(|z| z.norm() == 0.0);
    if degenerate {
        let codes = vec![SparseVector::zeros(d); n];
        let loss = mean_loss(&g, samples, &codes);
        return Ok(ModResult {
            dictionary: Dictionary::new(g)?,
            codes,
            loss_trace: vec![loss],
            degenerate: true,
            ridge_used: false,
        });
    }

    let mut codes = encode_all(&Dictionary::new(g.clone())?, samples, s, config)?;
    let mut loss = mean_loss(&g, samples, &codes);
    let mut trace = vec![loss];
    let mut ridge_used = false;

    for epoch in 0..config.epochs {
        if loss <= config.target_loss {
            break;
        }
        let dict = Dictionary::new(g.clone())?;
        let fresh = encode_all(&dict, samples, s, config)?;
        codes = codes
            .into_par_iter()
            .zip(fresh.into_par_iter())
            .zip(samples.par_iter())
            .map(|((old, new), z)| {
                if residual_sq(&g, z, &new) <= residual_sq(&g, z, &old) {
                    new
                } else {
                    old
                }
            })
            .collect();
        let coded_loss = mean_loss(&g, samples, &codes);

        let mut used = vec![false; d];
        for c in &codes {
            for &(j, v) in c.entries() {
                if v != 0.0 {
                    used[j] = true;
                }
            }
        }
        let used_idx: Vec<usize> = (0..d).filter(|&j| used[j]).collect();
        if !used_idx.is_empty() {
            let (candidate, ridge) = least_squares_update(&g, samples, &codes, &used_idx);
            ridge_used |= ridge;
            if candidate.iter().all(|x| x.is_finite())
                && mean_loss(&candidate, samples, &codes) <= coded_loss
            {
                g = candidate;
            }
        }

        let mut scales = vec![1.0; d];
        for j in 0..d {
            let norm = g.column(j).norm();
            if norm > 0.0 {
                scales[j] = norm;
                g.column_mut(j).unscale_mut(norm);
            } else {
                used[j] = false;
            }
        }
        for c in &mut codes {
            c.scale_entries(&scales);
        }
        replace_unused_atoms(&mut g, &used, samples, &codes, &mut rng);
        loss = mean_loss(&g, samples, &codes);

        if let Some((g2, codes2, loss2)) =
            try_replace_duplicates(&g, samples, &codes, s, config, loss)?
        {
            g = g2;
            codes = codes2;
            loss = loss2;
        }
        log::debug!("epoch {epoch}: loss {loss:.6e}");
        trace.push(loss);
        let w = config.stall_window;
        if w > 0 && trace.len() > w && trace[trace.len() - 1 - w] - loss <= config.stall_tol * loss {
            break;
        }
    }

    Ok(ModResult {
        dictionary: Dictionary::new(g)?,
        codes,
        loss_trace: trace,
        degenerate: false,
        ridge_used,
    })
}

/// Unused atoms have all-zero code rows, so replacing them leaves the loss
/// unchanged. They are reseeded with residuals of the worst-fit samples.
fn replace_unused_atoms(
    g: &mut DMatrix<f64>,
    used: &[bool],
    samples: &[DVector<f64>],
    codes: &[SparseVector],
    rng: &mut impl Rng,
) {
    let unused: Vec<usize> = (0..used.len()).filter(|&j| !used[j]).collect();
    if unused.is_empty() {
        return;
    }
    let mut residuals: Vec<(f64, usize)> = samples
        .iter()
        .zip(codes)
        .enumerate()
        .map(|(i, (z, c))| (residual_sq(g, z, c), i))
        .collect();
    residuals.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (slot, &j) in unused.iter().enumerate() {
        let col = match residuals.get(slot) {
            Some(&(r, i)) if r > 0.0 => {
                let mut v = samples[i].clone();
                for &(a, x) in codes[i].entries() {
                    v.axpy(-x, &g.column(a), 1.0);
                }
                v
            }
            _ => DVector::from_fn(g.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal)),
        };
        g.set_column(j, &col.normalize());
    }
}

/// Reseeds the less used atom of each near-duplicate pair with the residual
/// of a badly fit sample. Accepted only if re-encoding does not raise the
/// loss, so monotonicity is preserved.
fn try_replace_duplicates(
    g: &DMatrix<f64>,
    samples: &[DVector<f64>],
    codes: &[SparseVector],
    s: usize,
    config: &ModConfig,
    loss: f64,
) -> Result<Option<(DMatrix<f64>, Vec<SparseVector>, f64)>> {
    let d = g.ncols();
    let mut usage = vec![0usize; d];
    for c in codes {
        for &(j, v) in c.entries() {
            if v != 0.0 {
                usage[j] += 1;
            }
        }
    }
    let gram = g.tr_mul(g);
    let mut victims = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if gram[(i, j)].abs() > config.duplicate_correlation {
                let v = if usage[i] < usage[j] { i } else { j };
                if !victims.contains(&v) {
                    victims.push(v);
                }
            }
        }
    }
    if victims.is_empty() {
        return Ok(None);
    }
    let mut residuals: Vec<(f64, usize)> = samples
        .iter()
        .zip(codes)
        .enumerate()
        .map(|(i, (z, c))| (residual_sq(g, z, c), i))
        .collect();
    residuals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut candidate = g.clone();
    for (slot, &j) in victims.iter().enumerate() {
        let Some(&(r, i)) = residuals.get(slot) else { break };
        if r <= 0.0 {
            break;
        }
        let mut v = samples[i].clone();
        for &(a, x) in codes[i].entries() {
            v.axpy(-x, &g.column(a), 1.0);
        }
        candidate.set_column(j, &v.normalize());
    }
    let dict = Dictionary::new(candidate.clone())?;
    let fresh = encode_all(&dict, samples, s, config)?;
    let new_loss = mean_loss(&candidate, samples, &fresh);
    Ok((new_loss <= loss).then_some((candidate, fresh, new_loss)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub d: usize,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub seed: u64,
    pub degenerate: bool,
    pub insufficient_data: bool,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub loss_monotone: bool,
    pub min_abs_correlation: f64,
    pub correlations: Vec<f64>,
    pub witness: Option<ScalePermWitness>,
    /// Largest relative column residual of the best alignment.
    pub alignment_error: f64,
    pub recovered: bool,
    #[serde(skip)]
    pub truth: Option<Dictionary>,
    #[serde(skip)]
    pub learned: Option<Dictionary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub d: usize,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub seed: u64,
    pub epochs: usize,
    pub min_correlation: f64,
}

impl RecoveryConfig {
    pub fn new(d: usize, p: usize, s: usize, n: usize, seed: u64) -> Self {
        RecoveryConfig {
            d,
            p,
            s,
            n,
            seed,
            epochs: 200,
            min_correlation: 0.99,
        }
    }
}

/// Plants a normalized Gaussian dictionary, draws exactly-`s`-sparse codes,
/// trains on the noiseless data and aligns the result with the truth.
pub fn dictionary_recovery_experiment(cfg: &RecoveryConfig) -> Result<RecoveryReport> {
    let RecoveryConfig { d, p, s, n, seed, .. } = *cfg;
    if d == 0 || p == 0 {
        return Err(LcgmError::InvalidArgument("d and p must be positive".into()));
    }
    let mut rng = substream(seed, 0);
    let truth = Dictionary::random_gaussian(p, d, &mut rng);
    let codes = sample_exact_sparsity(d, s, n, &mut rng);
    let mut data = DMatrix::zeros(n, p);
    for (i, c) in codes.iter().enumerate() {
        data.set_row(i, &truth.apply(c)?.transpose());
    }
    // each atom appears in about n·s/d samples and has p unknowns
    let insufficient_data = n < d || n * s < p * d;
    let mut report = RecoveryReport {
        d,
        p,
        s,
        n,
        seed,
        degenerate: s == 0,
        insufficient_data,
        epochs_run: 0,
        final_loss: 0.0,
        loss_monotone: true,
        min_abs_correlation: 0.0,
        correlations: Vec::new(),
        witness: None,
        alignment_error: f64::INFINITY,
        recovered: false,
        truth: Some(truth.clone()),
        learned: None,
    };
    if n < d {
        return Ok(report);
    }
    let mod_cfg = ModConfig {
        epochs: cfg.epochs,
        seed: substream(seed, 1).random(),
        ..ModConfig::default()
    };
    let trained = train_mod(&data, d, s, &mod_cfg)?;
    report.degenerate = trained.degenerate;
    report.epochs_run = trained.loss_trace.len() - 1;
    report.final_loss = *trained.loss_trace.last().unwrap_or(&0.0);
    report.loss_monotone = trained
        .loss_trace
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-6);
    let witness = best_scale_permutation(&truth, &trained.dictionary, MatchSolver::Assignment)?;
    report.correlations = matched_correlations(&truth, &trained.dictionary, &witness);
    report.min_abs_correlation = report.correlations.iter().copied().fold(1.0, f64::min);
    report.alignment_error = witness.max_relative_error(&truth, &trained.dictionary);
    report.recovered = !report.degenerate && report.min_abs_correlation >= cfg.min_correlation;
    report.witness = Some(witness);
    report.learned = Some(trained.dictionary);
    Ok(report)
}
