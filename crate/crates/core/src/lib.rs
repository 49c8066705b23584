//! Simulation of a three-qubit Kitaev-trimer Ramsey sensor and its
//! single-qubit, dimer and Landau-Zener comparisons.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod linalg;
pub mod model;
pub mod scan;
pub mod sensing;
pub mod signal;
pub mod spectrum;
pub mod tolerances;

pub use error::{Error, Result};
