mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lcgm_core::LcgmError;

/// Identifiability toolkit for latent concept generative models.
#[derive(Debug, Parser)]
#[command(name = "lcgm-kit", version)]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide the Blackwell relation between two models.
    Blackwell(BlackwellArgs),
    /// Certify identifiability of a finite class up to a transition group.
    Certify(CertifyArgs),
    /// Spark, incoherence and sparse injectivity of a dictionary.
    Spark(SparkArgs),
    /// Planted dictionary recovery with MOD training.
    DictRecover(DictRecoverArgs),
    /// Planted linear ICA recovery, with optional Gaussian checks.
    IcaDemo(IcaDemoArgs),
    /// Fit a Gaussian mixture by EM.
    MixtureFit(MixtureFitArgs),
    /// Train a sparse autoencoder decoder and certify it.
    SaeTrain(SaeTrainArgs),
    /// Run the bundled worked-example fixtures in exact arithmetic.
    PaperExamples(PaperExamplesArgs),
}

#[derive(Debug, Args)]
struct BlackwellArgs {
    model_a: PathBuf,
    model_b: PathBuf,
    /// `exact`, or `float:TOL` for float inputs.
    #[arg(long, default_value = "exact")]
    mode: String,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    class: PathBuf,
    #[arg(long, default_value = "exact")]
    mode: String,
}

#[derive(Debug, Args)]
struct SparkArgs {
    /// Dictionary as JSON (`{"matrix": rows}`) or CSV.
    #[arg(long)]
    matrix: PathBuf,
    /// Largest subset size for the brute-force search.
    #[arg(long)]
    max_k: Option<usize>,
    #[arg(long, default_value_t = lcgm_core::dictionary::DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Also report whether the dictionary is injective on S-sparse codes.
    #[arg(long)]
    s: Option<usize>,
}

#[derive(Debug, Args)]
struct DictRecoverArgs {
    #[arg(long, default_value_t = 12)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.99)]
    min_correlation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct IcaDemoArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Comma-separated source kinds: uniform, laplace, gaussian.
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<String>>,
    #[arg(long, default_value_t = 20000)]
    n: usize,
    #[arg(long, default_value_t = 0.15)]
    tol: f64,
    /// Also run the Gaussian rotation-invariance check.
    #[arg(long)]
    invariance: bool,
    /// Also run the independence test on a fully mixing rotation of the sources.
    #[arg(long)]
    darmois: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MixtureFitArgs {
    #[arg(long)]
    k: usize,
    /// Samples as CSV, one row per observation.
    #[arg(long)]
    data: PathBuf,
    /// Planted mixture JSON to match the fit against.
    #[arg(long)]
    planted: Option<PathBuf>,
    /// Largest matched component distance accepted against `--planted`.
    #[arg(long, default_value_t = 0.3)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SaeTrainArgs {
    /// Activations as CSV, one row per sample.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = lcgm_core::sae::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = lcgm_core::sae::DEFAULT_ALPHA)]
    alpha: f64,
    /// Extra seeds for a pairwise stability study.
    #[arg(long, value_delimiter = ',')]
    stability_seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 0.05)]
    stability_tol: f64,
    /// Save the trained model as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PaperExamplesArgs {
    /// Read `*.json` fixtures from this directory instead of the bundled set.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl From<LcgmError> for CliError {
    fn from(e: LcgmError) -> Self {
        match e {
            LcgmError::InvariantViolation(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub report: report::Report,
    /// The command ran but its verdict is negative.
    pub negative: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LCGM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("LCGM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Blackwell(a) => commands::blackwell(&a.model_a, &a.model_b, &a.mode),
        Command::Certify(a) => commands::certify(&a.class, &a.mode),
        Command::Spark(a) => commands::spark(&a.matrix, a.max_k, a.rank_tol, a.s),
        Command::DictRecover(a) => commands::dict_recover(commands::DictRecover {
            d: a.d,
            p: a.p,
            s: a.s,
            n: a.n,
            epochs: a.epochs,
            min_correlation: a.min_correlation,
            seed: a.seed,
        }),
        Command::IcaDemo(a) => commands::ica_demo(commands::IcaDemo {
            d: a.d,
            sources: a.sources,
            n: a.n,
            tol: a.tol,
            invariance: a.invariance,
            darmois: a.darmois,
            seed: a.seed,
        }),
        Command::MixtureFit(a) => commands::mixture_fit(commands::MixtureFit {
            k: a.k,
            data: a.data,
            planted: a.planted,
            tol: a.tol,
            max_iters: a.max_iters,
            seed: a.seed,
        }),
        Command::SaeTrain(a) => commands::sae_train(commands::SaeTrain {
            data: a.data,
            d: a.d,
            s: a.s,
            epochs: a.epochs,
            sigma: a.sigma,
            alpha: a.alpha,
            stability_seeds: a.stability_seeds,
            stability_tol: a.stability_tol,
            save_model: a.save_model,
            seed: a.seed,
        }),
        Command::PaperExamples(a) => commands::paper_examples(a.fixtures.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = run(cli).and_then(|outcome| {
        let text = outcome.report.to_json();
        match &out {
            Some(path) => std::fs::write(path, &text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(outcome.negative)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}
