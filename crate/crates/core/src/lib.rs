//! Core of a practical learned lossless image codec.
//!
//! The pipeline has three stages, each in its own module:
//!
//! - [`twar`]: a 12-parameter three-way autoregressive predictor that turns an
//!   image into a shifted residual and back, with a wavefront-parallel decoder.
//! - [`vqvae`]: an inference-only VQ-VAE that maps an image to latent codebook
//!   indices and the indices to a per-pixel logistic `(mu, s)` plane.
//! - [`ans`]: a semi-dynamic table-driven ANS coder over a small set of
//!   quantized distributions, cross-checked against the literal bit-loop coder
//!   in [`rans`].
//!
//! [`logistic`] glues the model to the coder: it discretizes truncated
//! logistics into quantized PMFs and recentres symbols so that only the scale
//! selects the distribution.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! features. The `parallel` feature enables rayon-backed wavefront and lane
//! decoding; results are bit-identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ans;
pub mod bits;
mod error;
pub mod image;
mod linalg;
pub mod logistic;
pub mod rans;
pub mod twar;
pub mod vqvae;

pub use ans::{CoderTables, DecodeTables, DistributionSet, EncodeTables, LaneSet};
pub use bits::BitStack;
pub use error::{Error, Result};
pub use image::{Channel, RgbImage};
pub use logistic::{QuantizedPmf, ScaleGrid};
pub use twar::{ShiftedResidual, TwarParams};

/// Largest precision exponent whose encode tables fit in unsigned 16 bits.
pub const MAX_TABLE_PRECISION: u32 = 12;
/// Default precision exponent for residual and index streams.
pub const DEFAULT_PRECISION: u32 = 12;
