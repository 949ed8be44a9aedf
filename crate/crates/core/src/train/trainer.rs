use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::dataset::{Dataset, Record};
use super::objective::{nll, nll_gradient, NegativePhase};
use super::optimizer::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::gibbs::DEFAULT_CD_K;
use crate::ndo::{materialize, NdoParams, Shape, DEFAULT_INIT_WIDTH};
use crate::qcore::{fidelity, DensityMatrix, MAX_QUBITS};
use crate::rng::{self, streams};

pub const DEFAULT_EPOCHS: usize = 1000;
pub const DEFAULT_BATCH_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_hidden: usize,
    pub n_aux: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// `None` picks exact enumeration up to the qubit cap and CD above it.
    pub negative_phase: Option<NegativePhase>,
    /// Sweeps per CD update when the negative phase is chosen automatically.
    pub cd_k: usize,
    pub seed: u64,
    pub init_width: f64,
    /// Fraction of records held out for model selection.
    pub holdout: Option<f64>,
    /// Logged against every epoch when present.
    pub reference: Option<DensityMatrix>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_hidden: 1,
            n_aux: 2,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerKind::default(),
            negative_phase: None,
            cd_k: DEFAULT_CD_K,
            seed: 0,
            init_width: DEFAULT_INIT_WIDTH,
            holdout: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 0 is the initial state, before any update.
    pub epoch: usize,
    /// Training-set NLL; absent above the enumeration cap.
    pub nll: Option<f64>,
    pub holdout_nll: Option<f64>,
    pub fidelity: Option<f64>,
}

/// What picked `best_epoch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    TrainingNll,
    HoldoutNll,
    /// No likelihood available; the last epoch is kept.
    LastEpoch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_params: NdoParams,
    pub best_epoch: usize,
    pub final_params: NdoParams,
    pub selection: Selection,
    pub negative_phase: NegativePhase,
}

impl TrainReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    train_with_observer(dataset, config, |_| {})
}

fn with_epoch<T>(epoch: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Training {
        epoch,
        source: Box::new(e),
    })
}

/// Runs training, calling `observer` after every epoch (including epoch 0).
pub fn train_with_observer<F>(dataset: &Dataset, config: &TrainConfig, mut observer: F) -> Result<TrainReport>
where
    F: FnMut(&EpochRecord),
{
    dataset.check()?;
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if !(config.init_width >= 0.0 && config.init_width.is_finite()) {
        return Err(Error::InvalidArgument(
            "initialisation width must be finite and non-negative".into(),
        ));
    }
    let n = dataset.n_qubits();
    let exact_available = n <= MAX_QUBITS;
    let phase = config.negative_phase.unwrap_or(if exact_available {
        NegativePhase::Exact
    } else {
        NegativePhase::ContrastiveDivergence { k: config.cd_k }
    });
    match phase {
        NegativePhase::Exact if !exact_available => {
            return Err(Error::TooManyQubits { n, cap: MAX_QUBITS });
        }
        NegativePhase::ContrastiveDivergence { k: 0 } => {
            return Err(Error::InvalidArgument("contrastive divergence needs k >= 1".into()));
        }
        _ => {}
    }
    if let Some(r) = &config.reference {
        if r.n_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.n_qubits(),
            });
        }
    }

    let (train_set, holdout_set) = split_holdout(dataset, config)?;
    let selection = if !exact_available {
        Selection::LastEpoch
    } else if holdout_set.is_some() {
        Selection::HoldoutNll
    } else {
        Selection::TrainingNll
    };

    let shape = Shape::new(n, config.n_hidden, config.n_aux)?;
    let mut params = NdoParams::random_init(shape, config.init_width, &mut rng::stream(config.seed, streams::INIT));
    let mut optimizer = Optimizer::new(config.optimizer, shape.len())?;
    let mut shuffle_rng = rng::stream(config.seed, streams::SHUFFLE);
    let mut chain_rng = rng::stream(config.seed, streams::CHAIN_BASE);
    let mut records: Vec<Record> = train_set.records();

    let evaluate = |epoch: usize, p: &NdoParams| -> Result<EpochRecord> {
        with_epoch(
            epoch,
            evaluate_epoch(epoch, p, &train_set, holdout_set.as_ref(), config, exact_available),
        )
    };

    let mut history = Vec::with_capacity(config.epochs + 1);
    let first = evaluate(0, &params)?;
    observer(&first);
    history.push(first);
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut best_score = score(&first, selection);

    for epoch in 1..=config.epochs {
        records.shuffle(&mut shuffle_rng);
        for batch in records.chunks(config.batch_size) {
            let g = with_epoch(epoch, nll_gradient(&train_set, batch, &params, phase, &mut chain_rng))?;
            with_epoch(epoch, optimizer.step(params.values_mut(), &g))?;
        }
        if let Some(bad) = params.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Training {
                epoch,
                source: Box::new(Error::NumericalDomain(alloc::format!(
                    "parameter {bad} became non-finite"
                ))),
            });
        }
        let rec = evaluate(epoch, &params)?;
        observer(&rec);
        let s = score(&rec, selection);
        if selection == Selection::LastEpoch || s < best_score {
            best_score = s;
            best_epoch = epoch;
            best_params = params.clone();
        }
        history.push(rec);
    }

    Ok(TrainReport {
        epochs: history,
        best_params,
        best_epoch,
        final_params: params,
        selection,
        negative_phase: phase,
    })
}

fn score(rec: &EpochRecord, selection: Selection) -> f64 {
    match selection {
        Selection::TrainingNll => rec.nll.unwrap_or(f64::INFINITY),
        Selection::HoldoutNll => rec.holdout_nll.unwrap_or(f64::INFINITY),
        Selection::LastEpoch => 0.0,
    }
}

fn evaluate_epoch(
    epoch: usize,
    params: &NdoParams,
    train_set: &Dataset,
    holdout: Option<&Dataset>,
    config: &TrainConfig,
    exact_available: bool,
) -> Result<EpochRecord> {
    let (nll_value, holdout_nll) = if exact_available {
        (
            Some(nll(train_set, params)?),
            holdout.map(|h| nll(h, params)).transpose()?,
        )
    } else {
        (None, None)
    };
    let fid = match &config.reference {
        Some(r) if exact_available => Some(fidelity(&materialize(params)?, r)?),
        _ => None,
    };
    Ok(EpochRecord {
        epoch,
        nll: nll_value,
        holdout_nll,
        fidelity: fid,
    })
}

fn split_holdout(dataset: &Dataset, config: &TrainConfig) -> Result<(Dataset, Option<Dataset>)> {
    let Some(fraction) = config.holdout else {
        return Ok((dataset.clone(), None));
    };
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut records = dataset.records();
    records.shuffle(&mut rng::stream(config.seed, streams::HOLDOUT));
    let m = records.len();
    if m < 2 {
        return Err(Error::InvalidArgument("dataset too small for a holdout split".into()));
    }
    let k = (crate::math::round(fraction * m as f64) as usize).clamp(1, m - 1);
    let (held, kept) = records.split_at(k);
    Ok((dataset.subset(kept), Some(dataset.subset(held))))
}
