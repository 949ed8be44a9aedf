//! Likelihood training of neural density operators from measurement records.

mod dataset;
mod objective;
mod optimizer;
mod trainer;

pub use dataset::{BasisGroup, Dataset, Record};
pub use objective::{
    grad_lambda, grad_mu, nll, nll_gradient, q_average, q_average_with, rotated_diagonal, NegativePhase, Summation,
};
pub use optimizer::{Optimizer, OptimizerKind, DEFAULT_ADADELTA_DECAY, DEFAULT_ADADELTA_EPSILON};
pub use trainer::{
    train, train_with_observer, EpochRecord, Selection, TrainConfig, TrainReport, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
};
