//! Unsupervised hybrid feature extraction for image classification.
//!
//! The crate builds convolutional feature extractors whose filters are
//! learned without labels, from two views of the same image patches:
//!
//! - the *amalgamated* view — patches vectorized into columns, filters from
//!   the leading eigenvectors of the patch Gram matrix;
//! - the *minutiae* view — patches kept as tensors, filters from outer
//!   products of LoMOI factor columns (a Tucker-style factorization that
//!   leaves the sample mode out).
//!
//! A two-layer cascade of either filter family gives the PCA network or the
//! tensor-filter network; running both banks side by side with shared
//! layer-2 learning gives the hybrid network. Responses are binarized,
//! hashed to integer codes and pooled into block histograms; the two views'
//! features are either concatenated or fused per sample by a small learned
//! attention head.

pub mod attention;
pub mod classifier;
pub mod convnet;
pub mod encoder;
pub mod error;
pub mod filter_bank;
pub mod io;
pub mod lomoi;
pub mod patches;
pub mod pipeline;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Matrix, Tensor};
