//! Command-line definitions and the subcommand drivers.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndo_core::datagen::{nine_bases, sample_dataset, MeasurementProtocol};
use ndo_core::maxlik::{maxlik_fit, MaxLikConfig, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};
use ndo_core::ndo::materialize;
use ndo_core::qcore::{depolarize_density, validate_density, Basis, DensityMatrix, TargetState};
use ndo_core::rng::derive_seed;
use ndo_core::train::{
    train_with_observer, NegativePhase, OptimizerKind, TrainConfig, DEFAULT_ADADELTA_DECAY, DEFAULT_ADADELTA_EPSILON,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::dataset_io::{load_dataset, save_dataset};
use crate::error::{write_file, Result, TomoError};
use crate::matrix_io::{format_blocks, load_matrix, save_matrix};
use crate::report_io::{phase_name, save_report};
use crate::sweep::{format_csv, run_sweep, SweepConfig};

pub const JOBS_ENV: &str = "NDO_TOMO_JOBS";
pub const SWEEP_DEFAULT_EPOCHS: usize = 40;

#[derive(Debug, Parser)]
#[command(
    name = "ndo-tomo",
    version,
    about = "Mixed-state tomography with neural density operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample measurement records from a (depolarized) target state.
    Gen(GenArgs),
    /// Train a neural density operator on a dataset.
    Train(TrainArgs),
    /// Compare a checkpoint or matrix with a reference state.
    Eval(EvalArgs),
    /// Maximum-likelihood reconstruction (Cholesky parametrization).
    Maxlik(MaxlikArgs),
    /// Fidelity sweep over noise, sample count and auxiliary units.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenArgs {
    /// `bell`, `psi_i`, or a matrix file.
    #[arg(long, default_value = "bell")]
    pub target: String,
    #[arg(long, default_value_t = 0.0)]
    pub p_dep: f64,
    /// Comma-separated basis labels, or `nine` for all two-qubit Pauli pairs.
    #[arg(long, default_value = "nine")]
    pub bases: String,
    #[arg(long, default_value_t = 1000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerChoice {
    Adadelta,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseChoice {
    /// Exact up to the enumeration cap, CD above it.
    Auto,
    Exact,
    Cd,
}

/// Model and optimizer flags shared by `train` and `sweep`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub n_hidden: usize,
    #[arg(long, default_value_t = ndo_core::train::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adadelta)]
    pub optimizer: OptimizerChoice,
    /// SGD step size.
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_ADADELTA_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = DEFAULT_ADADELTA_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = PhaseChoice::Auto)]
    pub negative_phase: PhaseChoice,
    #[arg(long, default_value_t = ndo_core::gibbs::DEFAULT_CD_K)]
    pub cd_k: usize,
    #[arg(long, default_value_t = ndo_core::ndo::DEFAULT_INIT_WIDTH)]
    pub init_width: f64,
    /// Fraction of records held out for model selection.
    #[arg(long)]
    pub holdout: Option<f64>,
}

impl ModelArgs {
    fn train_config(&self, n_aux: usize, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            n_hidden: self.n_hidden,
            n_aux,
            epochs,
            batch_size: self.batch_size,
            optimizer: match self.optimizer {
                OptimizerChoice::Adadelta => OptimizerKind::AdaDelta {
                    decay: self.decay,
                    epsilon: self.epsilon,
                },
                OptimizerChoice::Sgd => OptimizerKind::Sgd {
                    learning_rate: self.learning_rate,
                },
            },
            negative_phase: match self.negative_phase {
                PhaseChoice::Auto => None,
                PhaseChoice::Exact => Some(NegativePhase::Exact),
                PhaseChoice::Cd => Some(NegativePhase::ContrastiveDivergence { k: self.cd_k }),
            },
            cd_k: self.cd_k,
            seed,
            init_width: self.init_width,
            holdout: self.holdout,
            reference: None,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub n_aux: usize,
    #[arg(long, default_value_t = ndo_core::train::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference state for per-epoch fidelity: `bell`, `psi_i` or a matrix file.
    #[arg(long)]
    pub reference: Option<String>,
    /// Depolarizing strength applied to the reference.
    #[arg(long, default_value_t = 0.0)]
    pub p_dep: f64,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// No per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value = "bell")]
    pub reference: String,
    #[arg(long, default_value_t = 0.0)]
    pub p_dep: f64,
    /// Also write the evaluated density matrix to this file.
    #[arg(long)]
    pub out_matrix: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MaxlikArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub p_dep: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, default_value = "bell")]
    pub target: String,
    /// Comma-separated basis labels, or `nine` for all two-qubit Pauli pairs.
    #[arg(long, default_value = "nine")]
    pub bases: String,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub p_dep_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    pub ns_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub n_aux_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = SWEEP_DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// Fixed number of minibatch updates per run instead of a fixed epoch count.
    #[arg(long)]
    pub updates: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Skip the maximum-likelihood baseline.
    #[arg(long)]
    pub no_maxlik: bool,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, env = JOBS_ENV)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// `bell`, `psi_i` (and their aliases) or a matrix file, depolarized by `p_dep`.
pub fn resolve_state(spec: &str, p_dep: f64) -> Result<DensityMatrix> {
    let base = match TargetState::from_str(spec) {
        Ok(t) => DensityMatrix::from_pure(&t.vector())?,
        Err(_) => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(TomoError::Usage(format!(
                    "unknown state '{spec}' (expected bell, psi_i or a matrix file)"
                )));
            }
            validate_density(load_matrix(path)?).map_err(|report| TomoError::Format {
                source_name: spec.to_string(),
                message: format!("not a density matrix: {report}"),
            })?
        }
    };
    if !(0.0..=1.0).contains(&p_dep) {
        return Err(TomoError::Usage(format!("--p-dep must lie in [0, 1], got {p_dep}")));
    }
    Ok(depolarize_density(&base, p_dep)?)
}

pub fn parse_bases(spec: &str, n_qubits: usize) -> Result<Vec<Basis>> {
    if spec == "nine" {
        if n_qubits != 2 {
            return Err(TomoError::Usage("`--bases nine` needs a two-qubit target".into()));
        }
        return Ok(nine_bases());
    }
    spec.split(',')
        .map(|s| {
            let b: Basis = s
                .trim()
                .parse()
                .map_err(|e| TomoError::Usage(format!("--bases: {e}")))?;
            if b.len() != n_qubits {
                return Err(TomoError::Usage(format!(
                    "basis {b} has {} sites, target has {n_qubits} qubits",
                    b.len()
                )));
            }
            Ok(b)
        })
        .collect()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let target = resolve_state(&a.target, a.p_dep)?;
    let bases = parse_bases(&a.bases, target.n_qubits())?;
    if a.n_samples == 0 {
        return Err(TomoError::Usage("--n-samples must be positive".into()));
    }
    let protocol = MeasurementProtocol {
        bases,
        samples_per_basis: a.n_samples,
        seed: derive_seed(a.seed, "gen"),
    };
    let ds = sample_dataset(&target, &protocol)?;
    save_dataset(&ds, &a.out)?;
    eprintln!(
        "target {} p_dep={} qubits={} purity={:.6} bases={} records={}",
        a.target,
        a.p_dep,
        target.n_qubits(),
        target.purity(),
        protocol.bases.len(),
        ds.n_records()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let mut cfg = a.model.train_config(a.n_aux, a.epochs, derive_seed(a.seed, "train"));
    cfg.reference = a.reference.as_deref().map(|r| resolve_state(r, a.p_dep)).transpose()?;
    let quiet = a.quiet;
    let report = train_with_observer(&ds, &cfg, |r| {
        if !quiet {
            eprintln!(
                "epoch {} nll {} fidelity {}",
                r.epoch,
                fmt_opt(r.nll),
                fmt_opt(r.fidelity)
            );
        }
    })?;
    save_checkpoint(&report.best_params, &a.out_model)?;
    if let Some(path) = &a.out_report {
        save_report(&report, path)?;
    }
    let best = report.best();
    eprintln!(
        "best epoch {} nll {} fidelity {} negative_phase {}",
        report.best_epoch,
        fmt_opt(best.nll),
        fmt_opt(best.fidelity),
        phase_name(report.negative_phase)
    );
    Ok(())
}

/// Metrics and matrix blocks as printed by `eval`.
pub fn eval_text(rho: &DensityMatrix, reference: &DensityMatrix) -> Result<String> {
    if rho.n_qubits() != reference.n_qubits() {
        return Err(TomoError::Usage(format!(
            "state has {} qubits, reference has {}",
            rho.n_qubits(),
            reference.n_qubits()
        )));
    }
    Ok(format!(
        "# ndo-eval v1 qubits={}\nfidelity {:.6}\npurity {:.6}\ntrace_distance {:.6}\n{}",
        rho.n_qubits(),
        rho.fidelity(reference)?,
        rho.purity(),
        rho.trace_distance(reference)?,
        format_blocks(rho.matrix())
    ))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let rho = match (&a.model, &a.matrix) {
        (Some(m), _) => materialize(&load_checkpoint(m)?)?,
        (None, Some(m)) => validate_density(load_matrix(m)?).map_err(|report| TomoError::Format {
            source_name: m.display().to_string(),
            message: format!("not a density matrix: {report}"),
        })?,
        (None, None) => return Err(TomoError::Usage("one of --model or --matrix is required".into())),
    };
    let reference = resolve_state(&a.reference, a.p_dep)?;
    let text = eval_text(&rho, &reference)?;
    if let Some(p) = &a.out_matrix {
        save_matrix(rho.matrix(), p)?;
    }
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| TomoError::io("<stdout>", e))
}

fn cmd_maxlik(a: &MaxlikArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = MaxLikConfig {
        max_iters: a.max_iters,
        tolerance: a.tolerance,
        seed: derive_seed(a.seed, "maxlik"),
    };
    let fit = maxlik_fit(&ds, &cfg)?;
    save_matrix(fit.rho.matrix(), &a.out)?;
    if !fit.converged {
        eprintln!(
            "warning: not converged after {} iterations (gradient norm {:e})",
            fit.iterations, fit.grad_norm
        );
    }
    let fid = match &a.reference {
        Some(r) => Some(fit.rho.fidelity(&resolve_state(r, a.p_dep)?)?),
        None => None,
    };
    eprintln!(
        "iterations {} log_likelihood {:.6} gradient_norm {:e} fidelity {}",
        fit.iterations,
        fit.log_likelihood,
        fit.grad_norm,
        fmt_opt(fid)
    );
    Ok(())
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let target = resolve_state(&a.target, 0.0)?;
    let bases = parse_bases(&a.bases, target.n_qubits())?;
    let cfg = SweepConfig {
        target,
        bases,
        p_dep: a.p_dep_list.clone(),
        n_samples: a.ns_list.clone(),
        n_aux: a.n_aux_list.clone(),
        repeats: a.repeats,
        seed: a.seed,
        train: a.model.train_config(0, a.epochs, 0),
        updates: a.updates,
        maxlik: (!a.no_maxlik).then_some(MaxLikConfig {
            max_iters: a.max_iters,
            tolerance: a.tolerance,
            seed: 0,
        }),
        jobs: a.jobs.unwrap_or_else(default_jobs),
    };
    let rows = run_sweep(&cfg, |rows| {
        for r in rows {
            eprintln!(
                "p_dep {} n_s {} n_aux {} repeat {} fidelity_ndo {} fidelity_maxlik {}{}",
                r.p_dep,
                r.n_s,
                r.n_aux,
                r.repeat,
                fmt_opt(r.fidelity_ndo),
                fmt_opt(r.fidelity_maxlik),
                r.error.as_deref().map(|e| format!(" error {e}")).unwrap_or_default()
            );
        }
    })?;
    write_file(&a.out_csv, &format_csv(&rows)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Maxlik(a) => cmd_maxlik(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `argv` (with config expansion), runs, and returns the exit code.
pub fn main_with_args(argv: Vec<OsString>) -> u8 {
    let argv = match crate::config::expand_args(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
