//! Singular subspace perturbation toolkit.
//!
//! Evaluates classical and Gaussian-noise perturbation bounds for singular
//! values and singular subspaces, computes the matching empirical
//! quantities on synthetic instances, and runs spectral clustering for
//! Gaussian mixtures and planted submatrices.

pub mod error;
pub mod matrix;
pub mod subspace;
pub mod models;
pub mod clustering;
pub mod resolvent;
pub mod bounds;
pub mod harness;

pub use error::{Error, Result};
pub use matrix::{apply_norm, svd, truncated_svd, Coverage, DenseMatrix, DenseVector, NormSpec, SvdFactors};
