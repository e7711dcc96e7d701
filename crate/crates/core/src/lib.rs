//! Decision procedures and numerical checks for infinite divisibility and
//! positive association of squared Gaussian and permanental vectors.
//!
//! The crate is organised by concern:
//!
//! - [`matrix`] / [`matcore`]: kernel matrices, signatures, inversion,
//!   resolvents, eigenvalue and M-matrix screens.
//! - [`betaperm`]: β-permanents and the β-positivity scan over resolvents.
//! - [`idcheck`]: exact (signature / M-matrix) and battery-based
//!   infinite-divisibility verdicts.
//! - [`green`]: Green matrices of finite transient chains and their
//!   stability under Hadamard powers, constant shifts and restriction.
//! - [`sampler`]: exact Gaussian / permanental sampling and exponential
//!   tilting.
//! - [`assoc`]: Monte Carlo association tests, resolvent monotonicity,
//!   FKG lattice checks and shifted strong stochastic ordering.
//! - [`report`]: the versioned JSON report schema and its table rendering.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and sequentially otherwise. Every parallel loop merges its
//! results in a fixed order, so outputs do not depend on the worker count.

pub mod assoc;
pub mod betaperm;
pub mod defaults;
pub mod error;
pub mod green;
pub mod idcheck;
pub mod matcore;
pub mod matrix;
pub mod report;
pub mod sampler;
pub mod verdict;

mod par;

pub use error::{Error, Result};
pub use matrix::{KernelMatrix, Signature};
pub use verdict::{Outcome, Verdict};
