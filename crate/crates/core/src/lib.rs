//! Viscous shock profiles for scalar conservation laws and the weighted
//! relative-entropy contraction with a dynamical shift.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod calculus;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod pde;
pub mod profile;

pub use calculus::{FluxEntropyPair, SmoothFn};
pub use config::ExperimentConfig;
pub use dynamics::{run_contraction, RunReport};
pub use error::{Error, Result};
