//! File formats, image IO and the end-to-end codec around `pilc-core`.
//!
//! - [`container`]: the "PILC" compressed-image format, [`compress`] and
//!   [`decompress`] for the `twar-static` and `twar-vqvae` backends.
//! - [`model_file`]: the "PILW" model file shared with the trainer.
//! - [`imageio`]: binary PPM, raw RGB8 and CIFAR10 batches.
//! - [`fit`] and [`bench`]: the work behind the `pilc fit` and `pilc bench`
//!   subcommands.

pub mod bench;
pub mod container;
mod error;
pub mod fit;
pub mod imageio;
pub mod model_file;
mod reader;

pub use container::{
    bpd_report, compress, compress_image, decompress, decompress_image, Backend, CompressOptions,
    CompressedImage, ContainerHeader,
};
pub use error::{PilcError, Result};
pub use model_file::{random_weights, Model, ModelHash};
pub use pilc_core;
