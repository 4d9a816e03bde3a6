//! Score-based generation of spatial covariance matrices (SCMs).
//!
//! The pipeline learns the score of a distribution of symmetric matrices with
//! denoising score matching, samples new matrices with annealed Langevin
//! dynamics or a reverse-time variance-exploding SDE, and projects each sample
//! onto the SPD cone by flooring its eigenvalues. Generated sets are evaluated
//! with affine-invariant Riemannian geometry: Fréchet means and a
//! minimum-distance-to-mean classifier.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod sampler;
pub mod score;
pub mod spd;

pub use error::{Error, Result};
