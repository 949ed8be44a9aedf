use alloc::string::String;

/// Errors raised by model evaluation, sampling, training and reconstruction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("{n} qubits exceeds the exact-enumeration cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },

    #[error("unknown basis label '{0}' (expected X, Y or Z)")]
    UnknownLabel(char),

    #[error("unknown state '{0}'")]
    UnknownState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("non-positive probability {value:e} for outcome {outcome} in basis {basis}")]
    NonPositiveProbability { basis: String, outcome: String, value: f64 },

    #[error("quasiprobability normalisation vanished (log magnitude {0})")]
    VanishingNormalization(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("number of samples must be positive")]
    ZeroSamples,

    #[error("Cholesky parameters are all zero")]
    ZeroCholesky,

    #[error("training aborted at epoch {epoch}: {source}")]
    Training {
        epoch: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
