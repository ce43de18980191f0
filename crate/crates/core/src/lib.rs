//! Optimal transport distances between finite Markov chains.
//!
//! Weisfeiler-Lehman style distances (finite and infinite depth), discounted
//! fixed points, general horizon laws, entropic gradients, and Monte Carlo
//! reference checks.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod cli;
pub mod error;
pub mod grad;
pub mod io;
pub mod ot;
pub mod otm;
pub mod reference;

pub use error::{Error, Result};
