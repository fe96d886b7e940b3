//! Workbench for attention-condenser convolutional networks aimed at binary
//! chest X-ray tuberculosis screening.
//!
//! The crate bundles everything the workflow needs:
//!
//! - [`tensor`]: dense f32 tensors with reverse-mode autograd and the
//!   convolution/pooling/normalization primitives the network family uses.
//! - [`nn`]: the distinctive building blocks — visual attention condensers
//!   and PEPE (projection-expansion-projection-expansion) blocks.
//! - [`model`]: declarative network configs, deterministic builds, parameter
//!   and MAC accounting, and self-describing checkpoints.
//! - [`data`]: dataset manifests, 224x224 preprocessing with corner mean
//!   imputation, augmentation, and stratified 80/10/10 splits.
//! - [`train`]: SGD-with-momentum training with deterministic seeding.
//! - [`eval`]: confusion-matrix screening metrics (accuracy, sensitivity,
//!   specificity).
//! - [`explain`]: occlusion-based critical-factor masks and overlay
//!   rendering.
//! - [`search`]: constrained random architecture search maximizing a
//!   NetScore-style objective under sensitivity/specificity/parameter
//!   constraints.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model;
pub mod nn;
pub mod search;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{NoGradGuard, Tensor};
