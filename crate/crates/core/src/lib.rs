//! Tensor-decomposition toolkit.
//!
//! Three connected pieces:
//! - [`saddle`]: orthogonal 4th-order tensor decomposition by noisy projected
//!   stochastic gradient descent, with simple-sampling and ICA oracles;
//! - [`cumulant`] + [`conv_als`]: shift-invariant dictionary (filter) learning
//!   by circulant-constrained ALS on the unfolded third cumulant, plus an
//!   alternating-minimization baseline;
//! - [`embed`]: word-sequence embeddings built by encoding, projecting,
//!   deconvolutional decoding against the learned filters, and max-k pooling.
//!
//! [`tensor`], [`matrix`], [`linalg`], and [`circulant`] hold the shared
//! algebra; [`io`] the on-disk formats; [`benchmark`] the end-to-end
//! verification suite the CLI and the acceptance tests both run.

// index-heavy numeric kernels read better with explicit loops
#![allow(clippy::needless_range_loop)]

pub mod benchmark;
pub mod circulant;
pub mod conv_als;
pub mod cumulant;
pub mod embed;
pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod saddle;
pub mod tensor;

pub use error::{Error, Result};
