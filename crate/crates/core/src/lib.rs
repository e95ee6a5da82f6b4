//! Triangular factorization of positive operators along nests of subspaces.
//!
//! A positive matrix `C` and a nest (an increasing chain of subspaces) give a
//! canonical factor `V = Φ*√C`, triangular with respect to the nest, built
//! from the two-nest diagonal of `√C`. The [`dsbc`] module applies the
//! factorization to the connecting operator of a boundary-controlled 1D wave
//! equation and recovers the potential from the resulting model.

// `!(x > tol)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linops;
pub mod nest;
pub mod diagonal;
pub mod factor;
pub mod dsbc;
pub mod report;
pub mod cli;

pub use error::{Error, Result};
pub use linops::Mat;
