//! Handwritten Tifinagh character recognition toolkit.
//!
//! Everything needed to go from captured glyph images to Table-style top-1 /
//! top-5 accuracy numbers: the MNIST-style preprocessing pipeline, a 33-class
//! writer-attributed corpus model with IDX serialization, a synthetic corpus
//! generator, a small 2-conv / 2-pool CNN built from explicit kernels, and a
//! deterministic training loop with CSV/SVG curve export.

pub mod dataset;
pub mod error;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{GradPair, Scalar, Tensor};
