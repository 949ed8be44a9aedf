//! Neural density operators for mixed-state tomography.
//!
//! The crate is `no_std` (with `alloc`) and purely computational: the model,
//! its closed-form matrix elements, block Gibbs sampling, likelihood training
//! from basis-labelled measurement records and a Cholesky maximum-likelihood
//! baseline. File formats and the command line live in the `ndo-tomo` crate.
//!
//! Configurations are binary (`0`/`1`) and map to integer indices with the
//! first site as the most significant bit, so `|01⟩` is index 1 and `|10⟩` is
//! index 2 for two qubits.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
// NaN must fail the range checks, and index loops read better for the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod gibbs;
pub mod maxlik;
pub mod ndo;
pub mod qcore;
pub mod rng;
pub mod train;

mod math;

pub use error::{Error, Result};
pub use num_complex::Complex64;
