use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_ADADELTA_DECAY: f64 = 0.95;
pub const DEFAULT_ADADELTA_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { learning_rate: f64 },
    AdaDelta { decay: f64, epsilon: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::AdaDelta {
            decay: DEFAULT_ADADELTA_DECAY,
            epsilon: DEFAULT_ADADELTA_EPSILON,
        }
    }
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OptimizerKind::Sgd { learning_rate } if !(learning_rate > 0.0 && learning_rate.is_finite()) => Err(
                Error::InvalidArgument(alloc::format!("learning rate must be positive, got {learning_rate}")),
            ),
            OptimizerKind::AdaDelta { decay, .. } if !(decay > 0.0 && decay < 1.0) => Err(Error::InvalidArgument(
                alloc::format!("AdaDelta decay must lie in (0, 1), got {decay}"),
            )),
            OptimizerKind::AdaDelta { epsilon, .. } if !(epsilon > 0.0 && epsilon.is_finite()) => Err(
                Error::InvalidArgument(alloc::format!("AdaDelta epsilon must be positive, got {epsilon}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Optimizer with its running averages (empty for SGD).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    sq_grad: Vec<f64>,
    sq_update: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Result<Self> {
        kind.validate()?;
        let len = match kind {
            OptimizerKind::Sgd { .. } => 0,
            OptimizerKind::AdaDelta { .. } => n_params,
        };
        Ok(Self {
            kind,
            sq_grad: alloc::vec![0.0; len],
            sq_update: alloc::vec![0.0; len],
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// `E[g²]` and `E[Δθ²]` (AdaDelta only).
    pub fn accumulators(&self) -> (&[f64], &[f64]) {
        (&self.sq_grad, &self.sq_update)
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: grads.len(),
            });
        }
        match self.kind {
            OptimizerKind::Sgd { learning_rate } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= learning_rate * g;
                }
            }
            OptimizerKind::AdaDelta { decay, epsilon } => {
                if self.sq_grad.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.sq_grad.len(),
                        got: params.len(),
                    });
                }
                for i in 0..params.len() {
                    let g = grads[i];
                    self.sq_grad[i] = decay * self.sq_grad[i] + (1.0 - decay) * g * g;
                    let delta = -math::sqrt(self.sq_update[i] + epsilon) / math::sqrt(self.sq_grad[i] + epsilon) * g;
                    self.sq_update[i] = decay * self.sq_update[i] + (1.0 - decay) * delta * delta;
                    params[i] += delta;
                }
            }
        }
        Ok(())
    }
}
