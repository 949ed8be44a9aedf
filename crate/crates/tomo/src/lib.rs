//! File formats, fidelity sweeps and the `ndo-tomo` command line built on
//! `ndo-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod matrix_io;
pub mod report_io;
pub mod sweep;

pub use error::{Result, TomoError};
